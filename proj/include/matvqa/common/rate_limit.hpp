#pragma once

#include <algorithm>
#include <chrono>
#include <mutex>
#include <thread>

namespace matvqa {

/// Token bucket. acquire() blocks until a token is available; callers are
/// serialized on the internal mutex.
class TokenBucket {
public:
    using clock = std::chrono::steady_clock;

    /// rate_per_second <= 0 disables limiting.
    TokenBucket(double capacity, double rate_per_second)
        : m_capacity(std::max(capacity, 1.0)), m_rate(rate_per_second), m_tokens(m_capacity),
          m_last(clock::now()) {}

    void acquire() {
        if(m_rate <= 0) return;
        std::lock_guard lock(m_mutex);
        refill();
        if(m_tokens < 1.0) {
            auto wait = std::chrono::duration<double>((1.0 - m_tokens) / m_rate);
            std::this_thread::sleep_for(wait);
            refill();
        }
        m_tokens = std::max(0.0, m_tokens - 1.0);
    }

private:
    void refill() {
        auto now = clock::now();
        double elapsed = std::chrono::duration<double>(now - m_last).count();
        m_last = now;
        m_tokens = std::min(m_capacity, m_tokens + elapsed * m_rate);
    }

    std::mutex m_mutex;
    double m_capacity;
    double m_rate;
    double m_tokens;
    clock::time_point m_last;
};

} // namespace matvqa
