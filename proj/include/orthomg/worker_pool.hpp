#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace orthomg {

/// Fixed set of threads executing index-parallel loops. The calling thread
/// takes part in every loop, so a pool of size 1 spawns no threads.
/// One loop runs at a time; concurrent callers are serialized.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers = 1);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::size_t size() const noexcept { return helpers_.size() + 1; }

    /// Runs body(i) for i in [0, count). Rethrows the first exception raised.
    void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

private:
    void helper_loop();
    void drain();

    std::vector<std::thread> helpers_;
    std::mutex call_mutex_;

    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable finished_;
    const std::function<void(std::size_t)>* body_ = nullptr;
    std::size_t count_ = 0;
    std::size_t next_ = 0;
    std::size_t active_ = 0;
    std::size_t generation_ = 0;
    bool stopping_ = false;
    std::exception_ptr error_;
};

}  // namespace orthomg
