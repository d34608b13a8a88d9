#include "iotecs/timing.hpp"

#include <ctime>
#include <stdexcept>

namespace iotecs {

namespace {

// Spin margin carved off the tail of each sleep; nanosleep on a loaded box
// typically overshoots by less than this.
constexpr int64_t kSpinMarginNs = 150 * 1000;
constexpr int64_t kMinOsSleepNs = 1 * 1000 * 1000;

int64_t clock_ns(clockid_t id) {
    timespec ts;
    clock_gettime(id, &ts);
    return static_cast<int64_t>(ts.tv_sec) * 1000000000 + ts.tv_nsec;
}

void os_sleep_until(int64_t deadline_mono_ns) {
    timespec ts;
    ts.tv_sec = deadline_mono_ns / 1000000000;
    ts.tv_nsec = deadline_mono_ns % 1000000000;
    while (clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, nullptr) != 0) {
        // retried on EINTR
    }
}

} // namespace

int64_t mono_now_ns() { return clock_ns(CLOCK_MONOTONIC); }
int64_t wall_now_ns() { return clock_ns(CLOCK_REALTIME); }

void precise_sleep_until_mono(int64_t deadline_mono_ns) {
    int64_t remaining = deadline_mono_ns - mono_now_ns();
    if (remaining <= 0) return;
    if (remaining >= kMinOsSleepNs) {
        // Millisecond-class pauses: the OS sleep alone is accurate enough and
        // costs no CPU.
        os_sleep_until(deadline_mono_ns);
        return;
    }
    if (remaining > kSpinMarginNs) os_sleep_until(deadline_mono_ns - kSpinMarginNs);
    while (mono_now_ns() < deadline_mono_ns) {
#if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
#endif
    }
}

void precise_sleep_ns(int64_t ns) {
    if (ns > 0) precise_sleep_until_mono(mono_now_ns() + ns);
}

int64_t busy_compute_ns(int64_t duration_ns) {
    int64_t start = mono_now_ns();
    if (duration_ns <= 0) return 0;
    volatile double acc = 1.000000119;
    for (;;) {
        for (int i = 0; i < 64; i++) acc = acc * 1.000000119 + 0.25;
        int64_t elapsed = mono_now_ns() - start;
        if (elapsed >= duration_ns) return elapsed;
    }
}

AlignedClock::AlignedClock(int64_t offset_ns)
    : wall_anchor_(wall_now_ns()), mono_anchor_(mono_now_ns()), offset_ns_(offset_ns) {}

int64_t AlignedClock::now_ns() const {
    return wall_anchor_ + offset_ns_ + (mono_now_ns() - mono_anchor_);
}

int64_t AlignedClock::mono_for_wall(int64_t wall_ns) const {
    return mono_anchor_ + (wall_ns - wall_anchor_);
}

StepClock::StepClock(int64_t epoch_mono_ns, int64_t step_ns)
    : epoch_mono_ns_(epoch_mono_ns), step_ns_(step_ns) {
    if (step_ns <= 0) throw std::logic_error("StepClock: step must be positive");
}

StepClock::Wake StepClock::wait_for_step(int64_t i) {
    if (i <= last_step_) throw std::logic_error("StepClock: steps must be requested in order");
    last_step_ = i;
    int64_t deadline = deadline_for(i);
    precise_sleep_until_mono(deadline);
    int64_t now = mono_now_ns();
    return Wake{now, now > deadline ? now - deadline : 0};
}

} // namespace iotecs
