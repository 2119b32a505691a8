#include "pcdc/sequence.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>

#include "pcdc/error.hpp"
#include "pcdc/hash.hpp"

namespace pcdc {

namespace {

struct Job {
  int frame;
  int layer;
  FrameKind kind;
  std::vector<int> refs;  // absolute
};

// Stages of the whole sequence from the stored plans.
std::vector<std::vector<Job>> schedule(const std::vector<GofPlan>& plans, int gof_size) {
  std::vector<std::vector<Job>> out;
  for (std::size_t g = 0; g < plans.size(); ++g) {
    const GofPlan& p = plans[g];
    const int base = static_cast<int>(g) * gof_size;
    for (const std::vector<int>& stage : parallel_stages(p)) {
      std::vector<Job> jobs;
      for (int f : stage) {
        const auto i = static_cast<std::size_t>(f);
        Job j{base + f, p.layer[i], p.kind[i], {}};
        for (int r : p.refs[i]) j.refs.push_back(r == kPrevGofLast ? base - 1 : base + r);
        jobs.push_back(std::move(j));
      }
      out.push_back(std::move(jobs));
    }
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. The exception of
// the lowest failing index is rethrown.
void run_parallel(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ReferenceSet refs_of(const Job& j, const std::vector<FramePointCloud>& recon,
                     const std::vector<bool>& ready) {
  ReferenceSet r;
  for (std::size_t k = 0; k < j.refs.size(); ++k) {
    const int f = j.refs[k];
    if (f < 0 || static_cast<std::size_t>(f) >= recon.size() || !ready[static_cast<std::size_t>(f)]) {
      fail(ErrorCode::kSchedulingError,
           "frame " + std::to_string(j.frame) + ": reference " + std::to_string(f) +
               " is not decoded yet");
    }
    (k == 0 ? r.past : r.future) = &recon[static_cast<std::size_t>(f)];
  }
  return r;
}

}  // namespace

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PCDC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::uint64_t frame_checksum(const FramePointCloud& f) {
  Fnv1a h;
  h.update_u64(f.frame_index);
  h.update_u64(checksum(f.coords));
  for (double v : f.feats.flat()) h.update_f64(v);
  return h.digest();
}

EncodedSequence encode_sequence(std::span<const FramePointCloud> frames, const CodecConfig& cfg,
                                const CodecWeights& w, const SequenceOptions& opts) {
  cfg.validate();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].frame_index != i) {
      fail(ErrorCode::kInvalidArgument, "encode_sequence: frames must be numbered 0..n-1");
    }
  }
  const int n = static_cast<int>(frames.size());
  EncodedSequence out;
  out.stream.header = make_header(cfg, w.hash(), n);
  out.reconstructions.resize(frames.size());
  std::vector<bool> ready(frames.size(), false);
  const CodecOptions copts{opts.zero_context};
  const int threads = resolve_threads(opts.threads);

  for (const std::vector<Job>& stage : schedule(out.stream.header.plans, cfg.gof_size)) {
    std::vector<EncodeResult> results(stage.size());
    run_parallel(stage.size(), threads, [&](std::size_t i) {
      const Job& j = stage[i];
      results[i] = encode_frame(frames[static_cast<std::size_t>(j.frame)], j.kind,
                                refs_of(j, out.reconstructions, ready), cfg, w, copts);
    });
    for (std::size_t i = 0; i < stage.size(); ++i) {
      const Job& j = stage[i];
      EncodeResult& r = results[i];
      FrameReport rep;
      rep.frame_index = static_cast<std::uint32_t>(j.frame);
      rep.kind = j.kind;
      rep.layer = j.layer;
      rep.points = r.payload.point_count;
      rep.c3_bytes = r.payload.c3.size();
      rep.c4_bytes = r.payload.c4.size();
      rep.f4_bytes = r.payload.f4.size();
      rep.z_bytes = r.payload.z.size();
      rep.record_bytes = frame_record_bytes(r.payload);
      rep.estimate_f4_bits = r.estimate_f4_bits;
      rep.estimate_z_bits = r.estimate_z_bits;
      rep.reconstruction_checksum = frame_checksum(r.reconstruction);
      rep.diagnostics = std::move(r.diagnostics);
      out.reports.push_back(std::move(rep));
      out.stream.frames.push_back(std::move(r.payload));
      out.reconstructions[static_cast<std::size_t>(j.frame)] = std::move(r.reconstruction);
      ready[static_cast<std::size_t>(j.frame)] = true;
    }
  }
  out.bytes = mux(out.stream);
  return out;
}

std::vector<FramePointCloud> decode_sequence(const Stream& s, const CodecConfig& cfg_in,
                                             const CodecWeights& w,
                                             const SequenceOptions& opts) {
  check_compatible(s.header, cfg_in, w.hash());
  const CodecConfig cfg = config_for_stream(s.header, cfg_in);
  std::vector<FramePointCloud> out(s.header.frame_count);
  std::vector<bool> ready(out.size(), false);
  std::vector<const FramePayload*> by_frame(out.size(), nullptr);
  for (const FramePayload& p : s.frames) {
    if (p.frame_index >= out.size() || by_frame[p.frame_index]) {
      fail_decode(0, "frame " + std::to_string(p.frame_index) + " is missing or repeated");
    }
    by_frame[p.frame_index] = &p;
  }
  const CodecOptions copts{opts.zero_context};
  const int threads = resolve_threads(opts.threads);
  for (const std::vector<Job>& stage : schedule(s.header.plans, s.header.gof_size)) {
    std::vector<FramePointCloud> results(stage.size());
    run_parallel(stage.size(), threads, [&](std::size_t i) {
      const Job& j = stage[i];
      const FramePayload* p = by_frame[static_cast<std::size_t>(j.frame)];
      if (!p) fail_decode(0, "frame " + std::to_string(j.frame) + " is missing");
      if (p->kind != j.kind) {
        fail_decode(0, "frame " + std::to_string(j.frame) + ": kind disagrees with the GOF plan");
      }
      results[i] = decode_frame(*p, refs_of(j, out, ready), cfg, w, copts);
    });
    for (std::size_t i = 0; i < stage.size(); ++i) {
      const auto f = static_cast<std::size_t>(stage[i].frame);
      out[f] = std::move(results[i]);
      ready[f] = true;
    }
  }
  return out;
}

}  // namespace pcdc
