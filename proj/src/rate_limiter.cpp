#include "halo/rate_limiter.hpp"

#include <cmath>
#include <thread>

namespace halo {

using namespace std::chrono;

RateLimiter::RateLimiter(double requests_per_second, Clock clock)
    : limit_(requests_per_second > 0 ? requests_per_second : 1.0), clock_(std::move(clock)) {}

bool RateLimiter::slot_available_locked() {
    auto now = clock_();
    while (!recent_.empty() && now - recent_.front() >= seconds(1)) recent_.pop_front();
    return recent_.size() < static_cast<size_t>(std::ceil(limit_));
}

bool RateLimiter::try_acquire() {
    std::lock_guard lock(mu_);
    if (!slot_available_locked()) return false;
    recent_.push_back(clock_());
    return true;
}

void RateLimiter::acquire() {
    while (true) {
        {
            std::lock_guard lock(mu_);
            if (slot_available_locked()) {
                recent_.push_back(clock_());
                return;
            }
        }
        std::this_thread::sleep_for(milliseconds(20));
    }
}

}  // namespace halo
