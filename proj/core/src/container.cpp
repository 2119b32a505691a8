#include "pcdc/container.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "pcdc/bytes.hpp"
#include "pcdc/error.hpp"

namespace pcdc {

namespace {

void put_plan(ByteWriter& w, const GofPlan& p) {
  w.u8(static_cast<std::uint8_t>(p.frame_count));
  for (int f : p.order) {
    const auto i = static_cast<std::size_t>(f);
    w.u8(static_cast<std::uint8_t>(f));
    w.u8(static_cast<std::uint8_t>(p.layer[i]));
    w.u8(static_cast<std::uint8_t>(p.kind[i]));
    w.u8(static_cast<std::uint8_t>(p.refs[i].size()));
    for (int r : p.refs[i]) w.i8(static_cast<std::int8_t>(r));
  }
}

GofPlan get_plan(ByteReader& r, int gof_size) {
  const std::size_t at = r.offset();
  GofPlan p;
  p.gof_size = gof_size;
  p.frame_count = r.u8();
  if (p.frame_count < 1 || p.frame_count > gof_size) fail_decode(at, "bad GOF frame count");
  const auto n = static_cast<std::size_t>(p.frame_count);
  p.layer.assign(n, 0);
  p.kind.assign(n, FrameKind::kI);
  p.refs.assign(n, {});
  std::vector<bool> seen(n, false);
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t entry = r.offset();
    const std::uint8_t f = r.u8();
    if (f >= n || seen[f]) fail_decode(entry, "bad frame number in GOF plan");
    seen[f] = true;
    p.order.push_back(f);
    p.layer[f] = r.u8();
    const std::uint8_t kind = r.u8();
    if (kind > 2) fail_decode(entry + 2, "bad frame kind in GOF plan");
    p.kind[f] = static_cast<FrameKind>(kind);
    const std::uint8_t nrefs = r.u8();
    if (nrefs > 2) fail_decode(entry + 3, "too many references in GOF plan");
    for (std::uint8_t k = 0; k < nrefs; ++k) p.refs[f].push_back(r.i8());
  }
  try {
    validate_plan(p);
  } catch (const Error& e) {
    fail_decode(at, std::string("invalid GOF plan: ") + e.what());
  }
  return p;
}

bool same_plan(const GofPlan& a, const GofPlan& b) {
  return a.gof_size == b.gof_size && a.frame_count == b.frame_count && a.order == b.order &&
         a.layer == b.layer && a.kind == b.kind && a.refs == b.refs;
}

}  // namespace

std::vector<GofPlan> sequence_plans(int frame_count, int gof_size) {
  if (frame_count < 0) fail(ErrorCode::kInvalidArgument, "negative frame count");
  std::vector<GofPlan> plans;
  for (int start = 0; start < frame_count; start += gof_size) {
    GofPlan p = build_plan(gof_size, start == 0);
    if (frame_count - start < gof_size) p = truncate_plan(p, frame_count - start);
    plans.push_back(std::move(p));
  }
  return plans;
}

StreamHeader make_header(const CodecConfig& cfg, std::uint64_t weights_hash, int frame_count) {
  if (cfg.gof_size < 1 || cfg.gof_size > 128) {
    fail(ErrorCode::kInvalidArgument, "gof size does not fit the container");
  }
  StreamHeader h;
  h.gof_size = static_cast<std::uint8_t>(cfg.gof_size);
  h.bit_depth = static_cast<std::uint8_t>(cfg.bit_depth);
  h.lambda_index = lambda_index(cfg.lambda);
  h.frame_count = static_cast<std::uint32_t>(frame_count);
  h.config_hash = cfg.model_hash();
  h.weights_hash = weights_hash;
  h.plans = sequence_plans(frame_count, cfg.gof_size);
  return h;
}

std::size_t frame_record_bytes(const FramePayload& p) {
  return kFrameHeaderBytes + p.section_bytes();
}

std::vector<std::uint8_t> mux(const Stream& s) {
  const StreamHeader& h = s.header;
  if (s.frames.size() != h.frame_count) {
    fail(ErrorCode::kInvalidArgument, "mux: frame count differs from the header");
  }
  ByteWriter w;
  w.bytes(kMagic);
  w.u8(h.version);
  w.u8(h.gof_size);
  w.u8(h.bit_depth);
  w.u8(h.lambda_index);
  w.u32(h.frame_count);
  w.u64(h.config_hash);
  w.u64(h.weights_hash);
  w.u16(static_cast<std::uint16_t>(h.plans.size()));
  for (const GofPlan& p : h.plans) put_plan(w, p);
  for (const FramePayload& f : s.frames) {
    w.u32(f.frame_index);
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u32(f.point_count);
    for (std::uint32_t t : f.target_counts) w.u32(t);
    const std::array<std::pair<SectionTag, const std::vector<std::uint8_t>*>, 4> sections = {{
        {SectionTag::kC3Octree, &f.c3},
        {SectionTag::kC4Octree, &f.c4},
        {SectionTag::kF4Range, &f.f4},
        {SectionTag::kZFactorized, &f.z},
    }};
    for (const auto& [tag, bytes] : sections) {
      w.u8(static_cast<std::uint8_t>(tag));
      w.u32(static_cast<std::uint32_t>(bytes->size()));
    }
    for (const auto& [tag, bytes] : sections) w.bytes(*bytes);
  }
  return w.take();
}

Stream demux(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Stream s;
  StreamHeader& h = s.header;
  const auto magic = r.bytes(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) fail_decode(0, "bad magic");
  h.version = r.u8();
  if (h.version != kFormatVersion) {
    fail_decode(5, "unsupported format version " + std::to_string(h.version));
  }
  h.gof_size = r.u8();
  if (h.gof_size < 1 || (h.gof_size & (h.gof_size - 1)) != 0) fail_decode(6, "bad gof size");
  h.bit_depth = r.u8();
  if (h.bit_depth < 5 || h.bit_depth > 21) fail_decode(7, "bad bit depth");
  h.lambda_index = r.u8();
  if (h.lambda_index >= kLambdaLadder.size() && h.lambda_index != kLambdaIndexCustom) {
    fail_decode(8, "bad lambda index");
  }
  h.frame_count = r.u32();
  if (h.frame_count > bytes.size() / kFrameHeaderBytes) fail_decode(9, "frame count exceeds file size");
  h.config_hash = r.u64();
  h.weights_hash = r.u64();
  const std::size_t plan_at = r.offset();
  const std::uint16_t nplans = r.u16();
  const std::vector<GofPlan> expected = sequence_plans(static_cast<int>(h.frame_count), h.gof_size);
  if (nplans != expected.size()) fail_decode(plan_at, "GOF plan count does not match frame count");
  for (std::uint16_t g = 0; g < nplans; ++g) {
    const std::size_t at = r.offset();
    GofPlan p = get_plan(r, h.gof_size);
    if (!same_plan(p, expected[g])) fail_decode(at, "GOF plan differs from the reference schedule");
    h.plans.push_back(std::move(p));
  }

  std::vector<std::uint32_t> coding_order;
  for (std::size_t g = 0; g < h.plans.size(); ++g) {
    for (int f : h.plans[g].order) {
      coding_order.push_back(static_cast<std::uint32_t>(g * h.gof_size + static_cast<std::size_t>(f)));
    }
  }
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    const std::size_t at = r.offset();
    FramePayload f;
    f.frame_index = r.u32();
    if (f.frame_index != coding_order[i]) fail_decode(at, "frame out of coding order");
    const std::uint8_t kind = r.u8();
    if (kind > 2) fail_decode(at + 4, "bad frame kind");
    f.kind = static_cast<FrameKind>(kind);
    f.point_count = r.u32();
    for (std::uint32_t& t : f.target_counts) t = r.u32();
    std::array<std::uint32_t, 4> len{};
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t tag_at = r.offset();
      if (r.u8() != k + 1) fail_decode(tag_at, "unexpected section tag");
      len[k] = r.u32();
    }
    std::array<std::vector<std::uint8_t>*, 4> dst = {&f.c3, &f.c4, &f.f4, &f.z};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto b = r.bytes(len[k]);
      dst[k]->assign(b.begin(), b.end());
    }
    s.frames.push_back(std::move(f));
  }
  if (r.remaining() != 0) fail_decode(r.offset(), "trailing bytes after the last frame");
  return s;
}

void check_compatible(const StreamHeader& h, const CodecConfig& cfg, std::uint64_t weights_hash) {
  if (h.weights_hash != weights_hash) {
    fail(ErrorCode::kHashMismatch,
         "stream was encoded with different weights; pass the weights file used at encode time");
  }
  if (h.config_hash != cfg.model_hash()) {
    fail(ErrorCode::kHashMismatch,
         "stream was encoded with a different model configuration (channel widths, k, bit depth)");
  }
}

CodecConfig config_for_stream(const StreamHeader& h, CodecConfig cfg) {
  cfg.gof_size = h.gof_size;
  cfg.bit_depth = h.bit_depth;
  if (h.lambda_index < kLambdaLadder.size()) cfg.lambda = kLambdaLadder[h.lambda_index];
  return cfg;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
}

}  // namespace pcdc
