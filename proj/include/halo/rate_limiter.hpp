#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>

namespace halo {

// Sliding-window rate limiter: at most ceil(limit) acquisitions per
// 1-second window. Shared process-wide across workers. The clock is
// injectable so tests can drive time manually.
class RateLimiter {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    explicit RateLimiter(double requests_per_second,
                         Clock clock = [] { return std::chrono::steady_clock::now(); });

    // Blocks until a dispatch slot is available, then records it.
    void acquire();

    // Non-blocking variant; returns false when the window is full.
    bool try_acquire();

private:
    bool slot_available_locked();

    double limit_;
    Clock clock_;
    std::mutex mu_;
    std::deque<std::chrono::steady_clock::time_point> recent_;
};

}  // namespace halo
