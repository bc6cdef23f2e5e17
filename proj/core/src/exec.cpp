#include "callflow/exec.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <thread>
#include <utility>
#include <vector>

namespace callflow {

namespace {

// ---------------------------------------------------------------------------
// Virtual clock: a conductor steps activities one at a time in spawn order.
// ---------------------------------------------------------------------------

struct Activity {
  std::string name;
  std::function<void()> body;
  enum class State { Fresh, Running, Blocked, Done } state = State::Fresh;
  bool go = false;
  std::function<bool()> pred;  // valid while Blocked
  std::condition_variable cv;
  std::thread thread;
};

thread_local Activity* tls_self = nullptr;

class VirtualExec final : public Exec {
 public:
  ~VirtualExec() override {
    {
      std::unique_lock<std::mutex> lk(mu_);
      drained_ = true;
      events_.clear();
      for (auto& a : activities_) a->cv.notify_all();
    }
    for (auto& a : activities_)
      if (a->thread.joinable()) a->thread.join();
  }

  Tick now() const override { return now_; }

  std::unique_lock<std::mutex> lock() override { return std::unique_lock<std::mutex>(mu_); }

  bool wait(std::unique_lock<std::mutex>& lk, std::function<bool()> pred) override {
    if (pred()) return true;
    Activity* self = tls_self;
    self->pred = std::move(pred);
    self->state = Activity::State::Blocked;
    self->go = false;
    conductor_cv_.notify_all();
    self->cv.wait(lk, [&] { return self->go || drained_; });
    self->pred = nullptr;
    self->state = Activity::State::Running;
    if (self->go) {
      self->go = false;
      return true;
    }
    return false;  // drained; unwind
  }

  void notify() override {}  // the conductor re-evaluates predicates itself

  void post_at(Tick t, std::function<void()> fn) override {
    if (t < now_) t = now_;
    events_.emplace(std::make_pair(t, seq_++), std::move(fn));
  }

  void spawn(std::string name, std::function<void()> body) override {
    std::unique_lock<std::mutex> lk(mu_);
    drained_ = false;
    auto a = std::make_unique<Activity>();
    a->name = std::move(name);
    a->body = std::move(body);
    Activity* raw = a.get();
    activities_.push_back(std::move(a));
    raw->thread = std::thread([this, raw] { activity_main(raw); });
  }

  void run() override {
    std::unique_lock<std::mutex> lk(mu_);
    for (;;) {
      Activity* pick = nullptr;
      bool all_done = true;
      for (auto& up : activities_) {
        Activity* a = up.get();
        if (a->state != Activity::State::Done) all_done = false;
        if (a->state == Activity::State::Fresh ||
            (a->state == Activity::State::Blocked && a->pred && a->pred())) {
          pick = a;
          break;
        }
      }
      if (pick) {
        pick->go = true;
        pick->cv.notify_all();
        conductor_cv_.wait(lk, [&] {
          return pick->state == Activity::State::Done ||
                 (pick->state == Activity::State::Blocked && !pick->go);
        });
        continue;
      }
      if (!events_.empty()) {
        auto it = events_.begin();
        now_ = it->first.first;
        auto fn = std::move(it->second);
        events_.erase(it);
        fn();
        continue;
      }
      if (all_done) break;
      // Nothing runnable and no pending events: drain so activities unwind.
      drained_ = true;
      events_.clear();
      for (auto& a : activities_) a->cv.notify_all();
      conductor_cv_.wait(lk, [&] {
        for (auto& a : activities_)
          if (a->state != Activity::State::Done) return false;
        return true;
      });
      break;
    }
    std::vector<std::unique_ptr<Activity>> finished;
    finished.swap(activities_);
    lk.unlock();
    for (auto& a : finished)
      if (a->thread.joinable()) a->thread.join();
  }

 private:
  void activity_main(Activity* a) {
    std::unique_lock<std::mutex> lk(mu_);
    tls_self = a;
    a->cv.wait(lk, [&] { return a->go || drained_; });
    if (a->go) {
      a->go = false;
      a->state = Activity::State::Running;
      lk.unlock();
      a->body();  // the body takes lock() itself for each step
      lk.lock();
    }
    a->state = Activity::State::Done;
    conductor_cv_.notify_all();
  }

  std::mutex mu_;
  std::condition_variable conductor_cv_;
  std::vector<std::unique_ptr<Activity>> activities_;
  std::map<std::pair<Tick, std::uint64_t>, std::function<void()>> events_;
  Tick now_ = 0;
  std::uint64_t seq_ = 0;
  bool drained_ = false;
};

// ---------------------------------------------------------------------------
// Wall clock: ordinary threads, one shared condition variable, timer threads.
// ---------------------------------------------------------------------------

class RealExec final : public Exec {
 public:
  RealExec() : start_(std::chrono::steady_clock::now()) {}

  ~RealExec() override {
    {
      std::unique_lock<std::mutex> lk(mu_);
      drained_ = true;
      cv_.notify_all();
    }
    join_all();
  }

  Tick now() const override {
    auto dt = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
  }

  std::unique_lock<std::mutex> lock() override { return std::unique_lock<std::mutex>(mu_); }

  bool wait(std::unique_lock<std::mutex>& lk, std::function<bool()> pred) override {
    ++blocked_;
    for (;;) {
      if (pred()) {
        --blocked_;
        return true;
      }
      if (drained_) {
        --blocked_;
        return false;
      }
      if (blocked_ == live_ && timers_ == 0) {
        // Every activity is parked and no timer can wake one: declare drain.
        drained_ = true;
        cv_.notify_all();
        --blocked_;
        return false;
      }
      cv_.wait(lk);
    }
  }

  void notify() override { cv_.notify_all(); }

  void post_at(Tick t, std::function<void()> fn) override {
    Tick dt = t - now();
    if (dt < 0) dt = 0;
    ++timers_;
    threads_.emplace_back([this, dt, fn = std::move(fn)] {
      std::this_thread::sleep_for(std::chrono::milliseconds(dt));
      std::unique_lock<std::mutex> lk(mu_);
      fn();
      --timers_;
      cv_.notify_all();
    });
  }

  void spawn(std::string name, std::function<void()> body) override {
    (void)name;
    std::unique_lock<std::mutex> lk(mu_);
    drained_ = false;
    ++live_;
    threads_.emplace_back([this, body = std::move(body)] {
      body();
      std::unique_lock<std::mutex> lk(mu_);
      --live_;
      cv_.notify_all();
    });
  }

  void run() override {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [&] { return live_ == 0 && timers_ == 0; });
    lk.unlock();
    join_all();
  }

 private:
  void join_all() {
    std::vector<std::thread> mine;
    {
      std::unique_lock<std::mutex> lk(mu_);
      mine.swap(threads_);
    }
    for (auto& t : mine)
      if (t.joinable()) t.join();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::thread> threads_;
  std::chrono::steady_clock::time_point start_;
  int live_ = 0;
  int blocked_ = 0;
  int timers_ = 0;
  bool drained_ = false;
};

}  // namespace

std::unique_ptr<Exec> make_exec(ClockMode mode) {
  if (mode == ClockMode::Virtual) return std::make_unique<VirtualExec>();
  return std::make_unique<RealExec>();
}

bool sleep_for(Exec& ex, std::unique_lock<std::mutex>& lk, Tick dt) {
  auto woke = std::make_shared<bool>(false);
  ex.post_at(ex.now() + dt, [woke] { *woke = true; });
  return ex.wait(lk, [woke] { return *woke; });
}

}  // namespace callflow
