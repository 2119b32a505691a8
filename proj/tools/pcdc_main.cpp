#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcdc/container.hpp"
#include "pcdc/error.hpp"
#include "pcdc/geom_codec.hpp"
#include "pcdc/metrics.hpp"
#include "pcdc/nn/grad_check.hpp"
#include "pcdc/ply.hpp"
#include "pcdc/range_coder.hpp"
#include "pcdc/sequence.hpp"
#include "pcdc/synthetic.hpp"
#include "pcdc/train.hpp"

namespace fs = std::filesystem;
using namespace pcdc;

namespace {

// Expands the single %d / %0Nd field of a frame pattern.
std::string frame_path(const std::string& pattern, int index) {
  const auto pct = pattern.find('%');
  if (pct == std::string::npos) fail(ErrorCode::kInvalidArgument, "input pattern needs a %d field");
  std::size_t i = pct + 1;
  bool zero = false;
  if (i < pattern.size() && pattern[i] == '0') {
    zero = true;
    ++i;
  }
  int width = 0;
  while (i < pattern.size() && std::isdigit(static_cast<unsigned char>(pattern[i]))) {
    width = width * 10 + (pattern[i++] - '0');
  }
  if (i >= pattern.size() || pattern[i] != 'd' || pattern.find('%', i) != std::string::npos) {
    fail(ErrorCode::kInvalidArgument, "input pattern must contain exactly one %d or %0Nd field");
  }
  std::string num = std::to_string(index);
  if (static_cast<int>(num.size()) < width) {
    num.insert(0, static_cast<std::size_t>(width) - num.size(), zero ? '0' : ' ');
  }
  return pattern.substr(0, pct) + num + pattern.substr(i + 1);
}

FramePointCloud load_frame(const std::string& path, int bit_depth, std::uint32_t index) {
  const auto pts = ply::read_points(path);
  FramePointCloud f = voxelize(pts, bit_depth, index);
  f.feats = nn::Tensor(f.size(), 1, 1.0);
  return f;
}

std::vector<std::string> ply_files(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ply") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double parse_lambda(double lambda) {
  if (!(lambda > 0.0)) fail(ErrorCode::kInvalidArgument, "lambda must be > 0");
  return lambda;
}

int cmd_encode(const std::string& input, int frames, int gof, double lambda, int bit_depth,
               const std::string& weights, const std::string& out, bool zero_context) {
  CodecConfig cfg;
  cfg.gof_size = gof;
  cfg.lambda = parse_lambda(lambda);
  cfg.bit_depth = bit_depth;
  cfg.validate();
  const CodecWeights w = load_weights(weights, cfg);
  std::vector<FramePointCloud> seq;
  for (int f = 0; f < frames; ++f) {
    seq.push_back(load_frame(frame_path(input, f), bit_depth, static_cast<std::uint32_t>(f)));
  }
  SequenceOptions so;
  so.zero_context = zero_context;
  const EncodedSequence es = encode_sequence(seq, cfg, w, so);
  write_file(out, es.bytes);
  std::size_t points = 0;
  for (const auto& f : seq) points += f.size();
  std::printf("encoded %d frames, %zu bytes, %.4f bpp\n", frames, es.bytes.size(),
              points ? 8.0 * static_cast<double>(es.bytes.size()) / static_cast<double>(points) : 0.0);
  return 0;
}

int cmd_decode(const std::string& in, const std::string& weights, const std::string& out_dir,
               double lambda) {
  const Stream s = demux(read_file(in));
  CodecConfig cfg;
  if (lambda > 0.0) cfg.lambda = lambda;
  cfg = config_for_stream(s.header, cfg);
  const CodecWeights w = load_weights(weights, cfg);
  const auto frames = decode_sequence(s, cfg, w);
  fs::create_directories(out_dir);
  for (const auto& f : frames) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04u.ply", f.frame_index);
    ply::write_coords(fs::path(out_dir) / name, f.coords);
  }
  std::printf("decoded %zu frames into %s\n", frames.size(), out_dir.c_str());
  return 0;
}

int cmd_metrics(const std::string& rec_dir, const std::string& ref_dir, double peak,
                int bit_depth, const std::string& out) {
  const auto rec = ply_files(rec_dir), ref = ply_files(ref_dir);
  if (rec.size() != ref.size() || rec.empty()) {
    fail(ErrorCode::kInvalidArgument, "metrics: directories hold different numbers of .ply files");
  }
  std::vector<FrameQuality> q;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const auto a = load_frame(rec[i], bit_depth, static_cast<std::uint32_t>(i));
    const auto b = load_frame(ref[i], bit_depth, static_cast<std::uint32_t>(i));
    q.push_back({static_cast<std::uint32_t>(i), d1(a.coords, b.coords, peak).psnr,
                 d2(a.coords, b.coords, peak).psnr});
  }
  std::ofstream o(out);
  if (!o) fail(ErrorCode::kIoError, "cannot write " + out);
  write_quality_csv(o, q);
  write_quality_csv(std::cout, q);
  return 0;
}

int cmd_bdrate(const std::string& a, const std::string& b) {
  const double v = bd_rate(read_curve_csv(a), read_curve_csv(b));
  std::printf("BD-rate (cubic fit): %.3f%%\n", v);
  return 0;
}

int cmd_train(const std::string& fa, const std::string& fb, int steps, double lambda,
              std::uint64_t seed, double lr, int bit_depth, const std::string& out,
              const std::string& trace_path) {
  CodecConfig cfg;
  cfg.lambda = parse_lambda(lambda);
  cfg.bit_depth = bit_depth;
  cfg.seed = seed;
  const FramePointCloud a = load_frame(fa, bit_depth, 0), b = load_frame(fb, bit_depth, 1);
  CodecWeights w = make_weights(cfg);
  TrainOptions o;
  o.steps = steps;
  o.lambda = lambda;
  o.seed = seed;
  o.lr = lr;
  const TrainTrace t = train_overfit(a, b, cfg, w, o);
  save_weights(out, cfg, w);
  if (!trace_path.empty()) {
    std::ofstream tr(trace_path);
    tr << "step,loss,smoothed,rate_bpp,bce\n";
    for (std::size_t i = 0; i < t.raw.size(); ++i) {
      tr << i << ',' << t.raw[i] << ',' << t.smoothed[i] << ',' << t.rate[i] << ',' << t.bce[i]
         << '\n';
    }
  }
  std::printf("bce %.6f -> %.6f, final loss %.6f, weights %s\n", t.initial_bce, t.final_bce,
              t.smoothed.back(), out.c_str());
  return 0;
}

int cmd_report(const std::string& stream, const std::string& out, const std::string& json) {
  const Stream s = demux(read_file(stream));
  std::vector<FrameReport> reports;
  for (const FramePayload& p : s.frames) {
    FrameReport r;
    r.frame_index = p.frame_index;
    r.kind = p.kind;
    const GofPlan& plan = s.header.plans[p.frame_index / s.header.gof_size];
    r.layer = plan.layer[p.frame_index % s.header.gof_size];
    r.points = p.point_count;
    r.c3_bytes = p.c3.size();
    r.c4_bytes = p.c4.size();
    r.f4_bytes = p.f4.size();
    r.z_bytes = p.z.size();
    r.record_bytes = frame_record_bytes(p);
    reports.push_back(std::move(r));
  }
  std::ofstream o(out);
  if (!o) fail(ErrorCode::kIoError, "cannot write " + out);
  write_composition_csv(o, reports);
  if (!json.empty()) {
    std::ofstream j(json);
    write_report_json(j, reports, {});
  }
  std::printf("%zu frames written to %s\n", reports.size(), out.c_str());
  return 0;
}

int cmd_synth(const std::string& out_dir, int frames, std::uint64_t seed, bool rigid) {
  SyntheticOptions o;
  o.frames = static_cast<std::size_t>(frames);
  o.seed = seed;
  if (rigid) o.warp_amplitude = 0.0;
  fs::create_directories(out_dir);
  for (const auto& f : synthetic_sequence(o)) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04u.ply", f.frame_index);
    ply::write_coords(fs::path(out_dir) / name, f.coords, ply::Format::kAscii);
  }
  return 0;
}

bool report(const char* name, bool ok) {
  std::printf("%s %s\n", ok ? "PASS" : "FAIL", name);
  return ok;
}

int cmd_selftest() {
  bool ok = true;
  {
    std::mt19937_64 rng(11);
    std::vector<double> pmf = {0.5, 0.25, 0.125, 0.0625, 0.0625};
    const CdfTable t = CdfTable::from_pmf(pmf);
    std::vector<std::size_t> sym(20000);
    for (auto& s : sym) s = rng() % 5;
    RangeEncoder enc;
    for (auto s : sym) enc.encode(t, s);
    const auto bytes = enc.finish();
    RangeDecoder dec(bytes);
    bool same = true;
    for (auto s : sym) same &= dec.decode(t) == s;
    ok &= report("range coder round trip", same);
  }
  {
    std::mt19937_64 rng(12);
    bool same = true;
    for (int c = 0; c < 10; ++c) {
      std::vector<Coord> pts;
      for (int i = 0; i < 500; ++i) {
        pts.push_back({static_cast<int>(rng() % 1024), static_cast<int>(rng() % 1024),
                       static_cast<int>(rng() % 1024)});
      }
      std::sort(pts.begin(), pts.end());
      pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
      sort_morton(pts);
      same &= decode_coords(encode_coords(pts, 10)) == pts;
    }
    ok &= report("octree round trip", same);
  }
  {
    nn::Mlp m = nn::make_mlp("st", {5, 7, 3}, 3);
    nn::Tensor x(4, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.7 * static_cast<double>(i));
    std::vector<nn::Param*> ps;
    m.for_each_param([&](nn::Param& p) { ps.push_back(&p); });
    const double err = nn::grad_check([&](nn::Graph& g) { return m.forward(g, g.constant(x)); }, ps);
    ok &= report("mlp gradient check", err < 1e-4);
  }
  {
    bool legal = true;
    for (int g : {2, 4, 8, 16, 32}) {
      try {
        validate_plan(build_plan(g, true));
        validate_plan(build_plan(g, false));
      } catch (const Error&) {
        legal = false;
      }
    }
    ok &= report("scheduler legality", legal);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcdc: learned dynamic point cloud geometry codec"};
  app.require_subcommand(1);

  auto* enc = app.add_subcommand("encode", "encode a PLY sequence");
  std::string input, weights, out;
  int frames = 0, gof = 16, bit_depth = 10;
  double lambda = 15.0;
  bool zero_context = false;
  enc->add_option("--input", input, "frame pattern, e.g. seq_%04d.ply")->required();
  enc->add_option("--frames", frames, "number of frames")->required()->check(CLI::PositiveNumber);
  enc->add_option("--gof", gof, "group of frames size");
  enc->add_option("--lambda", lambda, "rate point {1,3,5,8,15}");
  enc->add_option("--bit-depth", bit_depth, "voxel grid bit depth");
  enc->add_option("--weights", weights, "trained weights")->required();
  enc->add_option("--out", out, "output stream")->required();
  enc->add_flag("--zero-context", zero_context, "ablation: disable the temporal context");

  auto* dec = app.add_subcommand("decode", "decode a stream into PLY files");
  std::string in, out_dir;
  double dec_lambda = 0.0;
  dec->add_option("--in", in, "input stream")->required();
  dec->add_option("--weights", weights, "trained weights")->required();
  dec->add_option("--out-dir", out_dir, "output directory")->required();
  dec->add_option("--lambda", dec_lambda, "lambda for streams with a custom rate point");

  auto* met = app.add_subcommand("metrics", "D1/D2 PSNR per frame");
  std::string rec_dir, ref_dir;
  double peak = 1023.0;
  met->add_option("--rec", rec_dir, "reconstructed frames")->required();
  met->add_option("--ref", ref_dir, "reference frames")->required();
  met->add_option("--peak", peak, "PSNR peak");
  met->add_option("--bit-depth", bit_depth, "voxel grid bit depth");
  met->add_option("--out", out, "CSV output")->required();

  auto* bd = app.add_subcommand("bdrate", "Bjontegaard delta rate of curve b against a");
  std::string curve_a, curve_b;
  bd->add_option("--curve-a", curve_a, "CSV of bpp,psnr")->required();
  bd->add_option("--curve-b", curve_b, "CSV of bpp,psnr")->required();

  auto* tr = app.add_subcommand("train-overfit", "overfit weights on a frame pair");
  std::string frame_a, frame_b, trace;
  int steps = 500;
  std::uint64_t seed = 7;
  double lr = 2e-3;
  tr->add_option("--frame-a", frame_a, "first frame")->required();
  tr->add_option("--frame-b", frame_b, "second frame")->required();
  tr->add_option("--steps", steps, "optimizer steps")->check(CLI::PositiveNumber);
  tr->add_option("--lambda", lambda, "rate-distortion trade-off");
  tr->add_option("--seed", seed, "seed for init and noise");
  tr->add_option("--lr", lr, "Adam learning rate");
  tr->add_option("--bit-depth", bit_depth, "voxel grid bit depth");
  tr->add_option("--out", out, "weights file")->required();
  tr->add_option("--trace", trace, "loss trace CSV");

  auto* rep = app.add_subcommand("report", "bitstream composition per frame");
  std::string stream, json;
  rep->add_option("--stream", stream, "input stream")->required();
  rep->add_option("--out", out, "CSV output")->required();
  rep->add_option("--json", json, "JSON output");

  auto* syn = app.add_subcommand("synth", "write a synthetic moving-surface sequence");
  bool rigid = false;
  syn->add_option("--out-dir", out_dir, "output directory")->required();
  syn->add_option("--frames", frames, "number of frames")->required();
  syn->add_option("--seed", seed, "shape seed");
  syn->add_flag("--rigid", rigid, "translation only");

  app.add_subcommand("selftest", "gradient checks, coder round trips, scheduler legality");

  CLI11_PARSE(app, argc, argv);
  try {
    if (enc->parsed()) return cmd_encode(input, frames, gof, lambda, bit_depth, weights, out, zero_context);
    if (dec->parsed()) return cmd_decode(in, weights, out_dir, dec_lambda);
    if (met->parsed()) return cmd_metrics(rec_dir, ref_dir, peak, bit_depth, out);
    if (bd->parsed()) return cmd_bdrate(curve_a, curve_b);
    if (tr->parsed()) {
      return cmd_train(frame_a, frame_b, steps, lambda, seed, lr, bit_depth, out, trace);
    }
    if (rep->parsed()) return cmd_report(stream, out, json);
    if (syn->parsed()) return cmd_synth(out_dir, frames, seed, rigid);
    return cmd_selftest();
  } catch (const Error& e) {
    std::fprintf(stderr, "pcdc: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pcdc: %s\n", e.what());
    return 2;
  }
}
