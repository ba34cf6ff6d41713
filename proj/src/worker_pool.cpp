#include "orthomg/worker_pool.hpp"

namespace orthomg {

WorkerPool::WorkerPool(std::size_t workers)
{
    const std::size_t helpers = workers > 1 ? workers - 1 : 0;
    helpers_.reserve(helpers);
    for (std::size_t i = 0; i < helpers; ++i) {
        helpers_.emplace_back([this] { helper_loop(); });
    }
}

WorkerPool::~WorkerPool()
{
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : helpers_) {
        t.join();
    }
}

void WorkerPool::drain()
{
    // Claims indices until the loop is exhausted. Called with mutex_ held.
    std::unique_lock lock(mutex_, std::adopt_lock);
    while (next_ < count_) {
        const std::size_t i = next_++;
        const auto* body = body_;
        lock.unlock();
        try {
            (*body)(i);
        } catch (...) {
            std::lock_guard guard(mutex_);
            if (!error_) {
                error_ = std::current_exception();
            }
        }
        lock.lock();
    }
    lock.release();
}

void WorkerPool::helper_loop()
{
    std::size_t seen = 0;
    std::unique_lock lock(mutex_);
    for (;;) {
        wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) {
            return;
        }
        seen = generation_;
        ++active_;
        lock.release();
        drain();
        lock = std::unique_lock(mutex_, std::adopt_lock);
        if (--active_ == 0 && next_ >= count_) {
            finished_.notify_all();
        }
    }
}

void WorkerPool::parallel_for(std::size_t count, const std::function<void(std::size_t)>& body)
{
    if (count == 0) {
        return;
    }
    if (helpers_.empty() || count == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::lock_guard call(call_mutex_);
    std::unique_lock lock(mutex_);
    body_ = &body;
    count_ = count;
    next_ = 0;
    error_ = nullptr;
    ++generation_;
    ++active_;
    wake_.notify_all();
    lock.release();
    drain();
    lock = std::unique_lock(mutex_, std::adopt_lock);
    --active_;
    finished_.wait(lock, [&] { return active_ == 0 && next_ >= count_; });
    body_ = nullptr;
    if (error_) {
        auto e = error_;
        error_ = nullptr;
        std::rethrow_exception(e);
    }
}

}  // namespace orthomg
