#pragma once

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <memory>

namespace wbmpc {

/// Fixed-size worker group. Work items write to disjoint outputs, so results do
/// not depend on the worker count.
class WorkerPool {
 public:
  explicit WorkerPool(int workers = 1)
      : workers_(workers < 1 ? 1 : workers),
        arena_(workers_ > 1 ? std::make_unique<tbb::task_arena>(workers_) : nullptr) {}

  int workers() const { return workers_; }

  template <typename Fn>
  void for_each(int count, Fn&& fn) const {
    if (!arena_ || count <= 1) {
      for (int i = 0; i < count; ++i) fn(i);
      return;
    }
    arena_->execute([&] {
      tbb::parallel_for(tbb::blocked_range<int>(0, count), [&](const tbb::blocked_range<int>& r) {
        for (int i = r.begin(); i != r.end(); ++i) fn(i);
      });
    });
  }

 private:
  int workers_;
  std::unique_ptr<tbb::task_arena> arena_;
};

}  // namespace wbmpc
