#include "pcdc/ra_schedule.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc {

namespace {

[[noreturn]] void bad_plan(const std::string& why) {
  fail(ErrorCode::kSchedulingError, "GOF plan: " + why);
}

}  // namespace

char kind_letter(FrameKind k) {
  switch (k) {
    case FrameKind::kI:
      return 'I';
    case FrameKind::kP:
      return 'P';
    case FrameKind::kB:
      return 'B';
  }
  return '?';
}

int GofPlan::layer_count() const {
  int hi = -1;
  for (int l : layer) hi = std::max(hi, l);
  std::vector<char> seen(static_cast<std::size_t>(hi + 1), 0);
  for (int l : layer) seen[static_cast<std::size_t>(l)] = 1;
  return static_cast<int>(std::count(seen.begin(), seen.end(), 1));
}

GofPlan build_plan(int gof_size, bool is_first_gof) {
  if (gof_size < 2 || gof_size > 128 || !std::has_single_bit(static_cast<unsigned>(gof_size))) {
    fail(ErrorCode::kInvalidArgument,
         "build_plan: gof size must be a power of two in [2, 128], got " + std::to_string(gof_size));
  }
  const int levels = std::countr_zero(static_cast<unsigned>(gof_size));
  GofPlan p;
  p.gof_size = p.frame_count = gof_size;
  p.layer.resize(static_cast<std::size_t>(gof_size));
  p.kind.resize(static_cast<std::size_t>(gof_size));
  p.refs.resize(static_cast<std::size_t>(gof_size));
  for (int f = 0; f < gof_size; ++f) {
    const auto i = static_cast<std::size_t>(f);
    if (f == 0) {
      p.layer[i] = 0;
      p.kind[i] = is_first_gof ? FrameKind::kI : FrameKind::kP;
      if (!is_first_gof) p.refs[i] = {kPrevGofLast};
      continue;
    }
    const int tz = std::countr_zero(static_cast<unsigned>(f));
    const int step = 1 << tz;
    p.layer[i] = levels - tz;
    if (f + step < gof_size) {
      p.refs[i] = {f - step, f + step};
      p.kind[i] = FrameKind::kB;
    } else {
      p.refs[i] = {f - step};
      p.kind[i] = FrameKind::kP;
    }
  }
  for (int l = 0; l <= levels; ++l) {
    for (int f = 0; f < gof_size; ++f) {
      if (p.layer[static_cast<std::size_t>(f)] == l) p.order.push_back(f);
    }
  }
  validate_plan(p);
  return p;
}

GofPlan truncate_plan(const GofPlan& plan, int frame_count) {
  if (frame_count < 1 || frame_count > plan.frame_count) {
    fail(ErrorCode::kInvalidArgument, "truncate_plan: bad frame count " + std::to_string(frame_count));
  }
  GofPlan p;
  p.gof_size = plan.gof_size;
  p.frame_count = frame_count;
  for (int f : plan.order) {
    if (f < frame_count) p.order.push_back(f);
  }
  for (int f = 0; f < frame_count; ++f) {
    const auto i = static_cast<std::size_t>(f);
    p.layer.push_back(plan.layer[i]);
    std::vector<int> refs;
    for (int r : plan.refs[i]) {
      if (r < frame_count) refs.push_back(r);
    }
    FrameKind k = plan.kind[i];
    if (k == FrameKind::kB && refs.size() == 1) k = FrameKind::kP;
    p.kind.push_back(k);
    p.refs.push_back(std::move(refs));
  }
  validate_plan(p);
  return p;
}

void validate_plan(const GofPlan& p) {
  const auto n = static_cast<std::size_t>(p.frame_count);
  if (p.frame_count < 1 || p.frame_count > p.gof_size) bad_plan("bad frame count");
  if (p.order.size() != n || p.layer.size() != n || p.kind.size() != n || p.refs.size() != n) {
    bad_plan("per-frame tables have the wrong size");
  }
  std::vector<int> pos(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int f = p.order[i];
    if (f < 0 || f >= p.frame_count || pos[static_cast<std::size_t>(f)] != -1) {
      bad_plan("order is not a permutation");
    }
    pos[static_cast<std::size_t>(f)] = static_cast<int>(i);
  }
  for (std::size_t f = 0; f < n; ++f) {
    const auto& refs = p.refs[f];
    switch (p.kind[f]) {
      case FrameKind::kI:
        if (!refs.empty()) bad_plan("I-frame with references");
        break;
      case FrameKind::kP:
        if (refs.size() != 1) bad_plan("P-frame " + std::to_string(f) + " needs one reference");
        break;
      case FrameKind::kB:
        if (refs.size() != 2) bad_plan("B-frame " + std::to_string(f) + " needs two references");
        if (!(refs[0] < static_cast<int>(f) && refs[1] > static_cast<int>(f))) {
          bad_plan("B-frame " + std::to_string(f) + " needs one past and one future reference");
        }
        break;
    }
    for (int r : refs) {
      if (r == kPrevGofLast) {
        if (f != 0) bad_plan("only frame 0 may reference the previous GOF");
        continue;
      }
      if (r < 0 || r >= p.frame_count) bad_plan("reference outside the GOF");
      if (pos[static_cast<std::size_t>(r)] >= pos[f]) {
        bad_plan("frame " + std::to_string(f) + " is coded before its reference " +
                 std::to_string(r));
      }
      if (p.layer[static_cast<std::size_t>(r)] >= p.layer[f]) {
        bad_plan("reference " + std::to_string(r) + " is not on a lower layer than " +
                 std::to_string(f));
      }
    }
  }
}

std::vector<std::vector<int>> parallel_stages(const GofPlan& plan) {
  std::vector<std::vector<int>> stages;
  int current = -1;
  for (int f : plan.order) {
    const int l = plan.layer[static_cast<std::size_t>(f)];
    if (l != current) {
      stages.emplace_back();
      current = l;
    }
    stages.back().push_back(f);
  }
  for (const auto& s : stages) {
    for (int f : s) {
      for (int r : plan.refs[static_cast<std::size_t>(f)]) {
        if (std::find(s.begin(), s.end(), r) != s.end()) {
          bad_plan("frames " + std::to_string(f) + " and " + std::to_string(r) + " share a stage");
        }
      }
    }
  }
  return stages;
}

BufferLifetimes buffer_lifetimes(const GofPlan& plan) {
  const auto n = static_cast<std::size_t>(plan.frame_count);
  BufferLifetimes b;
  b.last_user.assign(n, -1);
  b.release_position.assign(n, -1);
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[static_cast<std::size_t>(plan.order[i])] = static_cast<int>(i);
  int prev_release = -1;  // when the previous GOF's last frame can go
  for (int f : plan.order) {
    for (int r : plan.refs[static_cast<std::size_t>(f)]) {
      if (r == kPrevGofLast) {
        prev_release = std::max(prev_release, pos[static_cast<std::size_t>(f)]);
        continue;
      }
      b.last_user[static_cast<std::size_t>(r)] = f;
      b.release_position[static_cast<std::size_t>(r)] = pos[static_cast<std::size_t>(f)];
    }
  }
  for (std::size_t f = 0; f < n; ++f) {
    if (b.release_position[f] < 0) b.release_position[f] = pos[f];
  }
  // The final frame of a full GOF opens the next one.
  if (plan.frame_count == plan.gof_size) {
    b.release_position[n - 1] = plan.frame_count;
  }
  // Occupancy right after each coding step: frames decoded so far that are
  // still needed later.
  for (std::size_t i = 0; i < n; ++i) {
    int held = prev_release > static_cast<int>(i) ? 1 : 0;
    for (std::size_t f = 0; f < n; ++f) {
      if (pos[f] <= static_cast<int>(i) && b.release_position[f] > static_cast<int>(i)) ++held;
    }
    b.peak = std::max(b.peak, held);
  }
  return b;
}

std::vector<std::vector<ScheduledFrame>> sequence_stages(int frame_count, int gof_size) {
  std::vector<std::vector<ScheduledFrame>> out;
  if (frame_count <= 0) return out;
  for (int start = 0; start < frame_count; start += gof_size) {
    GofPlan plan = build_plan(gof_size, start == 0);
    if (frame_count - start < gof_size) plan = truncate_plan(plan, frame_count - start);
    for (const auto& stage : parallel_stages(plan)) {
      std::vector<ScheduledFrame> s;
      for (int f : stage) {
        ScheduledFrame sf;
        sf.frame = start + f;
        sf.layer = plan.layer[static_cast<std::size_t>(f)];
        sf.kind = plan.kind[static_cast<std::size_t>(f)];
        for (int r : plan.refs[static_cast<std::size_t>(f)]) {
          sf.refs.push_back(r == kPrevGofLast ? start - 1 : start + r);
        }
        s.push_back(std::move(sf));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace pcdc
