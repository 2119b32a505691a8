#ifndef PCDC_RA_SCHEDULE_HPP_
#define PCDC_RA_SCHEDULE_HPP_

#include <cstdint>
#include <vector>

namespace pcdc {

enum class FrameKind : std::uint8_t { kI = 0, kP = 1, kB = 2 };

char kind_letter(FrameKind k);

// Reference of the first frame of a non-initial GOF: the last frame of the
// previous GOF.
inline constexpr int kPrevGofLast = -1;

// Hierarchical random-access plan of one GOF. Per-frame vectors are indexed
// by frame position inside the GOF; refs are GOF-relative with kPrevGofLast
// for the cross-GOF link. A truncated (final, partial) GOF has
// frame_count < gof_size.
struct GofPlan {
  int gof_size = 0;
  int frame_count = 0;
  std::vector<int> order;
  std::vector<int> layer;
  std::vector<FrameKind> kind;
  std::vector<std::vector<int>> refs;

  int layer_count() const;
};

// Dyadic layers: frame 0 on layer 0, frame f on layer log2(G) - v2(f).
// Coding order is by layer then index. Frame f references f - s and, when
// it exists inside the GOF, f + s, where s = 2^v2(f).
GofPlan build_plan(int gof_size, bool is_first_gof);

// Keeps frames [0, frame_count); bidirectional frames that lose their future
// reference become P-frames.
GofPlan truncate_plan(const GofPlan& plan, int frame_count);

// Throws kSchedulingError on any violated invariant: order is a permutation,
// references precede their users in order and sit on strictly lower layers,
// kinds agree with reference counts.
void validate_plan(const GofPlan& plan);

// Frames grouped by layer, in coding order. Frames within one stage never
// reference each other.
std::vector<std::vector<int>> parallel_stages(const GofPlan& plan);

struct BufferLifetimes {
  // Per frame: the frame that uses it last as a reference, -1 if none.
  std::vector<int> last_user;
  // Per frame: position in coding order after which it can be dropped.
  // frame_count means "kept for the next GOF".
  std::vector<int> release_position;
  // Largest number of frames held at once, counting the previous GOF's last
  // frame while it is still needed.
  int peak = 0;
};

BufferLifetimes buffer_lifetimes(const GofPlan& plan);

// One frame of a whole sequence with absolute reference indices.
struct ScheduledFrame {
  int frame = 0;
  int layer = 0;
  FrameKind kind = FrameKind::kI;
  std::vector<int> refs;
};

// Stages for a sequence of `frame_count` frames: GOFs in order, each split
// into its parallel stages.
std::vector<std::vector<ScheduledFrame>> sequence_stages(int frame_count, int gof_size);

}  // namespace pcdc

#endif  // PCDC_RA_SCHEDULE_HPP_
