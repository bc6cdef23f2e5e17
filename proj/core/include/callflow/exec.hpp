#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace callflow {

using Tick = std::int64_t;  // abstract milliseconds (virtual) or ms since start (real)

enum class ClockMode { Virtual, Real };

// Runs a set of blocking-style activities (scheduler, coordinator, listener,
// drivers) over either a deterministic virtual clock or the wall clock.
//
// Virtual mode is a cooperative simulation: exactly one activity runs at a
// time, picked in spawn order; the clock only advances when every activity is
// blocked, by firing the earliest posted event. That makes runs with the same
// inputs bit-identical. Real mode backs the same interface with ordinary
// threads, one shared condition variable, and timer threads.
//
// Locking convention: every activity takes lock() once and holds it for the
// whole step; ex.wait(lk, pred) is the only yield point. State shared between
// activities (queues, pools, the trace) is therefore mutated in well-ordered
// critical sections in both modes.
class Exec {
 public:
  virtual ~Exec() = default;

  virtual Tick now() const = 0;  // call while holding lock()
  virtual std::unique_lock<std::mutex> lock() = 0;

  // Parks the calling activity until pred() holds (pred runs under the lock).
  // Returns false when the engine drained (nothing runnable, no pending
  // events) before the predicate became true; callers unwind on that.
  virtual bool wait(std::unique_lock<std::mutex>& lk, std::function<bool()> pred) = 0;

  // Signal waiters after a state change. No-op in virtual mode, where the
  // conductor re-evaluates predicates anyway.
  virtual void notify() = 0;

  // Schedules fn to run under the lock at time t, followed by an implicit
  // notify(). Call while holding lock().
  virtual void post_at(Tick t, std::function<void()> fn) = 0;

  // Registers a new activity. Call while NOT holding lock() and not from
  // inside an activity; phases spawn their activities up front and use
  // post_at for timed follow-ups.
  virtual void spawn(std::string name, std::function<void()> body) = 0;

  // Drives all spawned activities to completion (or drain). May be called
  // repeatedly, with spawns in between; virtual time carries across phases.
  virtual void run() = 0;
};

std::unique_ptr<Exec> make_exec(ClockMode mode);

// Blocks the calling activity for dt ticks. Returns false if drained first.
bool sleep_for(Exec& ex, std::unique_lock<std::mutex>& lk, Tick dt);

// FIFO channel between activities; lives under the engine lock. recv returns
// nullopt once the channel is closed and empty, or when the engine drained.
template <class T>
class Channel {
 public:
  void send(Exec& ex, std::unique_lock<std::mutex>& lk, T v) {
    assert(lk.owns_lock());
    (void)lk;
    if (closed_) return;  // receiver already gone; drop
    q_.push_back(std::move(v));
    ex.notify();
  }

  std::optional<T> recv(Exec& ex, std::unique_lock<std::mutex>& lk) {
    if (!ex.wait(lk, [this] { return !q_.empty() || closed_; })) return std::nullopt;
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

  void close(Exec& ex, std::unique_lock<std::mutex>& lk) {
    assert(lk.owns_lock());
    (void)lk;
    closed_ = true;
    ex.notify();
  }

  bool empty() const { return q_.empty(); }
  bool is_closed() const { return closed_; }

 private:
  std::deque<T> q_;
  bool closed_ = false;
};

}  // namespace callflow
