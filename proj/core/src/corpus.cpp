#include "callflow/corpus.hpp"

#include <algorithm>
#include <random>
#include <vector>

#include "callflow/callseq.hpp"

namespace callflow {

namespace {

ToolSpec make_tool(std::string name, FunctionKind kind, ModeFlag mode, DurationSpec dur,
                   ResultKind result) {
  ToolSpec t;
  t.name = std::move(name);
  t.kind = kind;
  t.mode = mode;
  t.profile = default_profile(kind);
  t.duration = dur;
  t.result = result;
  return t;
}

}  // namespace

GeneratedPlan generate_random_plan(const RandomPlanSpec& spec) {
  GeneratedPlan out;
  const bool ranged = !spec.uniform_durations;
  out.manifest.tools = {
      make_tool("search", FunctionKind::Inout, ModeFlag::Block,
                ranged ? DurationSpec{3, 9} : DurationSpec{5, 5}, ResultKind::Text),
      make_tool("fetch", FunctionKind::Inout, ModeFlag::Nonblock,
                ranged ? DurationSpec{2, 12} : DurationSpec{5, 5}, ResultKind::Text),
      make_tool("llm", FunctionKind::Compute, ModeFlag::Block,
                ranged ? DurationSpec{60, 140} : DurationSpec{100, 100}, ResultKind::Text),
      make_tool("math", FunctionKind::Compute, ModeFlag::Block,
                ranged ? DurationSpec{20, 80} : DurationSpec{100, 100}, ResultKind::Number),
  };

  std::mt19937_64 rng(spec.seed);
  const int n = std::max(1, spec.n_calls);
  if (n == 1) {
    GeneratedPlan single;
    single.plan_text = "s1: self(prompt=\"seed " + std::to_string(spec.seed) + "\")\n";
    single.manifest.ensure_self();
    return single;
  }
  const int depth = std::max(1, std::min(spec.max_rank, n));

  // Rank layout: one call pins each rank so the longest path is exactly
  // `depth`; the rest land anywhere.
  std::vector<int> rank_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    rank_of[static_cast<std::size_t>(i)] =
        i < depth ? i + 1 : 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(depth));
  std::sort(rank_of.begin(), rank_of.end());

  // Call i is "s{i+1}"; ranks ascend with the index, so references always
  // point backwards.
  std::vector<std::vector<int>> by_rank(static_cast<std::size_t>(depth + 1));
  for (int i = 0; i < n; ++i)
    by_rank[static_cast<std::size_t>(rank_of[static_cast<std::size_t>(i)])].push_back(i);

  CallSequence seq;
  std::vector<std::string> function_of(static_cast<std::size_t>(n));
  int compute_budget = static_cast<int>(spec.compute_fraction * n + 0.5);

  for (int i = 0; i < n; ++i) {
    FunctionCall call;
    call.id = "s" + std::to_string(i + 1);
    // Selection sampling: exactly compute_budget of the n calls come out
    // compute, whichever way the draws fall.
    bool compute = compute_budget > 0 &&
                   (rng() % static_cast<std::uint64_t>(n - i) <
                    static_cast<std::uint64_t>(compute_budget));
    if (compute) --compute_budget;
    if (compute) {
      call.function = (rng() % 100) < 35 ? "math" : "llm";
    } else {
      call.function =
          (rng() % 100) < static_cast<std::uint64_t>(spec.nonblock_fraction * 100 + 0.5)
              ? "fetch"
              : "search";
    }
    function_of[static_cast<std::size_t>(i)] = call.function;

    int rank = rank_of[static_cast<std::size_t>(i)];
    std::vector<int> preds;
    if (rank > 1) {
      const auto& above = by_rank[static_cast<std::size_t>(rank - 1)];
      int first = above[static_cast<std::size_t>(rng() % above.size())];
      preds.push_back(first);
      if (above.size() > 1 && rng() % 2 == 0) {
        int second = above[static_cast<std::size_t>(rng() % above.size())];
        if (second != first) preds.push_back(second);
      }
      if (rank > 2 && rng() % 5 < 2) {  // skewed join: one much-older predecessor
        int shallow_rank = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(rank - 2));
        const auto& pool = by_rank[static_cast<std::size_t>(shallow_rank)];
        int extra = pool[static_cast<std::size_t>(rng() % pool.size())];
        if (std::find(preds.begin(), preds.end(), extra) == preds.end()) preds.push_back(extra);
      }
    }

    if (preds.empty()) {
      Argument arg;
      arg.name = "arg0";
      arg.synthetic = true;
      arg.value = Expr::make_text("topic " + std::to_string(i + 1));
      call.args.push_back(std::move(arg));
    } else {
      std::vector<std::string> ref_ids;
      for (int p : preds) ref_ids.push_back("s" + std::to_string(p + 1));
      bool all_numeric = true;
      for (int p : preds)
        if (function_of[static_cast<std::size_t>(p)] != "math") all_numeric = false;

      int shape = i % 4;
      if (shape == 3 && !all_numeric) shape = 1;
      Argument arg;
      arg.name = "arg0";
      arg.synthetic = true;
      switch (shape) {
        case 0: {  // bare reference(s), one argument each
          arg.value = Expr::make_ref(ref_ids[0]);
          call.args.push_back(std::move(arg));
          for (std::size_t k = 1; k < ref_ids.size(); ++k) {
            Argument more;
            more.name = "arg" + std::to_string(k);
            more.synthetic = true;
            more.value = Expr::make_ref(ref_ids[k]);
            call.args.push_back(std::move(more));
          }
          break;
        }
        case 1: {  // one array of references
          Expr arr;
          arr.kind = Expr::Kind::Array;
          for (const auto& rid : ref_ids) arr.children.push_back(Expr::make_ref(rid));
          arg.value = std::move(arr);
          call.args.push_back(std::move(arg));
          break;
        }
        case 2: {  // string with a placeholder per reference
          Expr text;
          text.kind = Expr::Kind::Text;
          text.text.push_back({false, "combine "});
          for (std::size_t k = 0; k < ref_ids.size(); ++k) {
            if (k) text.text.push_back({false, " with "});
            text.text.push_back({true, ref_ids[k]});
          }
          arg.value = std::move(text);
          call.args.push_back(std::move(arg));
          break;
        }
        default: {  // arithmetic over numeric predecessors
          Expr sum = Expr::make_ref(ref_ids[0]);
          for (std::size_t k = 1; k < ref_ids.size(); ++k) {
            Expr bin;
            bin.kind = Expr::Kind::Binary;
            bin.op = '+';
            bin.children = {std::move(sum), Expr::make_ref(ref_ids[k])};
            sum = std::move(bin);
          }
          Expr bin;
          bin.kind = Expr::Kind::Binary;
          bin.op = '*';
          bin.children = {std::move(sum), Expr::make_number("2")};
          arg.value = std::move(bin);
          call.args.push_back(std::move(arg));
          break;
        }
      }
    }
    seq.calls.push_back(std::move(call));
  }

  out.plan_text = render_sequence(seq);
  return out;
}

}  // namespace callflow
