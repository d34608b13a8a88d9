// Clocks, precise sleeps and the busy-compute primitive.
//
// Timestamps are "wall-anchored monotonic": a CLOCK_REALTIME anchor captured
// once, advanced by CLOCK_MONOTONIC. They never jump with NTP adjustments yet
// remain comparable across processes (and, with an exchanged offset, across
// hosts).
#pragma once

#include <cstdint>

namespace iotecs {

int64_t mono_now_ns();
int64_t wall_now_ns();

// Sleeps until the CLOCK_MONOTONIC deadline. Pauses of 1 ms and above use a
// plain OS sleep (absolute, immune to syscall-entry drift); shorter remainders
// finish on a spin so sub-millisecond pacing stays accurate.
void precise_sleep_until_mono(int64_t deadline_mono_ns);
void precise_sleep_ns(int64_t ns);

// Spins on floating-point work (no sleeping, keeps the CPU busy) until at
// least duration_ns has elapsed. Returns the actual elapsed time.
int64_t busy_compute_ns(int64_t duration_ns);

class AlignedClock {
public:
    // offset_ns shifts readings into a remote peer's clock domain
    // (peer_wall - local_wall), exchanged over the control channel.
    explicit AlignedClock(int64_t offset_ns = 0);

    int64_t now_ns() const;       // wall-anchored monotonic + offset
    int64_t offset_ns() const { return offset_ns_; }

    // Converts an absolute wall-clock instant into this process's
    // CLOCK_MONOTONIC timeline (for cross-process epoch alignment).
    int64_t mono_for_wall(int64_t wall_ns) const;

private:
    int64_t wall_anchor_;
    int64_t mono_anchor_;
    int64_t offset_ns_;
};

// Wall-clock alignment of simulation steps. Step i starts at
// epoch + i * step; deadlines are anchored to the epoch, not to the previous
// step's end, so late wakes do not accumulate drift.
class StepClock {
public:
    StepClock(int64_t epoch_mono_ns, int64_t step_ns);

    struct Wake {
        int64_t mono_ns; // actual wake time
        int64_t late_ns; // wake - deadline, >= 0 when late
    };

    // Blocks until step i's start. Steps must be requested in strictly
    // increasing order; throws std::logic_error otherwise.
    Wake wait_for_step(int64_t i);

    int64_t epoch_mono_ns() const { return epoch_mono_ns_; }
    int64_t step_ns() const { return step_ns_; }
    int64_t deadline_for(int64_t i) const { return epoch_mono_ns_ + i * step_ns_; }

private:
    int64_t epoch_mono_ns_;
    int64_t step_ns_;
    int64_t last_step_ = -1;
};

} // namespace iotecs
