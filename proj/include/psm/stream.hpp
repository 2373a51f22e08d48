#pragma once

#include <charconv>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

#include "psm/errors.hpp"
#include "psm/motion.hpp"

namespace psm {

namespace detail {

// shortest representation that round-trips exactly
inline void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& v) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    return res.ec == std::errc() && res.ptr == last;
}

}  // namespace detail

// Trace CSV layout:
//   # rate=<hz>                 (required)
//   # label=<task>,<intensity>  (optional)
//   t,ax,ay,az,gx,gy,gz[,ox,oy,oz]
//   <numeric rows, LF endings>
MotionTrace read_trace_csv(const std::string& path);
void write_trace_csv(const MotionTrace& trace, const std::string& path);

// One row of the live feed; no trailing newline.
std::string encode_frame(const ImuSample& sample);

// Total: any byte sequence yields either a sample or a reason. Accepts 7
// or 10 comma-separated fields matching the trace CSV row layout.
struct DecodeResult {
    std::optional<ImuSample> sample;
    std::string error;
};
DecodeResult decode_frame(std::string_view line);

// Single-producer single-consumer queue that drops the oldest entry when
// full, so a slow consumer sees recent data rather than stale data.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    // returns the number of entries evicted to make room (0 or 1)
    std::size_t push(T value) {
        std::unique_lock lk(mu_);
        std::size_t dropped = 0;
        if (q_.size() >= capacity_) {
            q_.pop_front();
            dropped = 1;
        }
        q_.push_back(std::move(value));
        lk.unlock();
        cv_.notify_one();
        return dropped;
    }

    // lossless variant: waits for room instead of evicting; false once closed
    bool push_wait(T value) {
        std::unique_lock lk(mu_);
        space_.wait(lk, [&] { return q_.size() < capacity_ || closed_; });
        if (closed_) return false;
        q_.push_back(std::move(value));
        lk.unlock();
        cv_.notify_one();
        return true;
    }

    void close() {
        {
            std::lock_guard lk(mu_);
            closed_ = true;
        }
        cv_.notify_all();
        space_.notify_all();
    }

    // blocks until an entry or close; empty optional means drained and closed
    std::optional<T> pop() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return !q_.empty() || closed_; });
        if (q_.empty()) return std::nullopt;
        T v = std::move(q_.front());
        q_.pop_front();
        lk.unlock();
        space_.notify_one();
        return v;
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable space_;
    std::deque<T> q_;
    std::size_t capacity_;
    bool closed_ = false;
};

struct ReplayReport {
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    double max_latency = 0.0;  // s, enqueue to sink
    double wall_time = 0.0;    // s
};

// Replays a trace through a bounded queue with inter-sample delays scaled
// by 1/speed (speed = inf replays as fast as possible). The sink returning
// false aborts the replay with SinkClosed.
ReplayReport replay(const MotionTrace& trace, double speed,
                    const std::function<bool(const ImuSample&)>& sink,
                    std::size_t queue_capacity = 256);

}  // namespace psm
