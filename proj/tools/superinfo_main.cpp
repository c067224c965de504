// superinfo: reproducible desk-scale runs of the contrastive + KL +
// reconstruction objective on synthetic two-view data.
//
// Exit codes: 0 success, 1 check-suite failure, 2 input/validation error,
// 3 runtime numeric failure.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "superinfo/superinfo.hpp"

namespace si = superinfo;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNumeric = 3;

// ---------------------------------------------------------------------------
// shared plumbing

si::DatasetContainer to_container(const si::Tensor<float>& x,
                                  const std::vector<uint32_t>& labels) {
  si::DatasetContainer ds;
  ds.samples = x;
  ds.labels = labels;
  return ds;
}

void save_pair(const si::PairedViews& views, const std::string& prefix) {
  si::save_container(to_container(views.v1, views.labels), prefix + ".v1.sids");
  si::save_container(to_container(views.v2, views.labels), prefix + ".v2.sids");
}

si::PairedViews load_pair(const std::string& prefix) {
  si::DatasetContainer v1 = si::load_container(prefix + ".v1.sids");
  si::DatasetContainer v2 = si::load_container(prefix + ".v2.sids");
  if (v1.samples.shape != v2.samples.shape) {
    throw si::ValidationError("paired views at '" + prefix + "' have mismatched shapes");
  }
  if (v1.labels != v2.labels) {
    throw si::ValidationError("paired views at '" + prefix + "' have mismatched labels");
  }
  return si::PairedViews{std::move(v1.samples), std::move(v2.samples), std::move(v1.labels)};
}

size_t env_threads() {
  const char* v = std::getenv("SUPERINFO_THREADS");
  if (!v || !*v) return 1;
  const size_t n = si::text::parse_uint<size_t>(v, "SUPERINFO_THREADS");
  return n == 0 ? 1 : n;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string spec_path;
  std::string out_prefix;
  uint64_t seed = 0;
  bool seed_given = false;
};

int run_gen_data(const GenDataArgs& args) {
  si::RunConfig cfg = si::RunConfig::from_file(args.spec_path);
  const uint64_t seed = args.seed_given ? args.seed : cfg.seed;
  si::SyntheticTask task = si::SyntheticTask::build(cfg.synth);
  si::Rng rng = si::Rng::stream(seed, "data");
  si::PairedViews train = task.sample(cfg.synth.n_samples, rng);
  si::PairedViews test = task.sample(cfg.data_n_test, rng);
  save_pair(train, args.out_prefix + ".train");
  save_pair(test, args.out_prefix + ".test");
  std::cout << "wrote " << train.size() << " train and " << test.size()
            << " test sample pairs of dim " << train.dim() << " under " << args.out_prefix
            << ".{train,test}.{v1,v2}.sids\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// mi-check

struct Suite {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_residual <= tolerance; }
  void update(double r) { max_residual = std::max(max_residual, r); }
};

using Vars = std::vector<std::string>;

int run_mi_check(uint64_t trials, uint64_t seed, const std::string& joint_path) {
  if (trials < 1) throw si::ValidationError("mi-check needs at least 1 trial");

  if (!joint_path.empty()) {
    std::ifstream in(joint_path);
    if (!in) throw si::ValidationError("cannot open joint CSV '" + joint_path + "'");
    si::JointDistribution j = si::JointDistribution::load_csv(in);
    std::cout << "joint '" << joint_path << "' accepted: " << j.n_vars() << " variables, "
              << j.n_outcomes() << " outcomes\n";
    for (const auto& v : j.variables()) {
      std::cout << "  H(" << v.name << ") = " << si::text::fmt(si::entropy(j, {v.name}))
                << " nats\n";
    }
  }

  si::Rng rng(seed);
  Suite sym{"symmetry I(A;B)=I(B;A)", 0, 1e-12};
  Suite nonneg{"non-negativity of MI/CMI", 0, 1e-12};
  Suite chain{"chain rule I(A,B;C)=I(B;C)+I(A;C|B)", 0, 1e-10};
  Suite order{"interaction-information order symmetry", 0, 1e-10};
  Suite split{"predictive/superfluous split residual", 0, 1e-10};
  Suite ordering{"bound ordering (sufficient repr vs minimal)", 0, 1e-10};
  Suite channel{"Gaussian KL bound >= analytic linear-Gaussian MI", 0, 1e-6};

  auto rand_card = [&rng](uint32_t lo, uint32_t hi) {
    return static_cast<uint32_t>(lo + rng.next_below(hi - lo + 1));
  };

  for (uint64_t t = 0; t < trials; ++t) {
    // Random 3-variable joint for the algebraic properties.
    si::JointDistribution j3 = si::random_joint(
        rng, {{"a", rand_card(2, 8)}, {"b", rand_card(2, 8)}, {"c", rand_card(2, 8)}});
    sym.update(std::abs(si::detail::mutual_info_raw_idx(j3, {0}, {1}) -
                       si::detail::mutual_info_raw_idx(j3, {1}, {0})));
    const double mi = si::detail::mutual_info_raw_idx(j3, {0}, {1});
    const double cmi = si::detail::conditional_mi_raw_idx(j3, {0}, {1}, {2});
    nonneg.update(std::max(-mi, 0.0));
    nonneg.update(std::max(-cmi, 0.0));
    chain.update(std::abs(si::mutual_info(j3, {"a", "b"}, {"c"}) -
                       si::mutual_info(j3, {"b"}, {"c"}) -
                       si::conditional_mi(j3, {"a"}, {"c"}, {"b"})));
    const double ii = si::interaction_info(j3, {"a"}, {"b"}, {"c"});
    order.update(std::abs(ii - (si::detail::mutual_info_raw_idx(j3, {1}, {2}) -
                             si::detail::conditional_mi_raw_idx(j3, {1}, {2}, {0}))));
    order.update(std::abs(ii - (si::detail::mutual_info_raw_idx(j3, {0}, {2}) -
                             si::detail::conditional_mi_raw_idx(j3, {0}, {2}, {1}))));

    // Predictive/superfluous split with a representation drawn from its
    // input alone.
    si::JointDistribution base = si::random_joint(
        rng, {{"v1", rand_card(2, 6)}, {"v2", rand_card(2, 6)}});
    const uint32_t zcard = rand_card(2, 6);
    si::JointDistribution with_z = si::attach_conditional(
        base, "v1", "z1", zcard,
        si::random_channel(rng, base.variables()[0].cardinality, zcard));
    si::DecompositionReport rep =
        si::decompose_predictive_superfluous(with_z, {"v1"}, {"v2"}, {"z1"});
    split.update(rep.residual);

    // Bound ordering with a sufficient (copy) representation and a label
    // variable hanging off v1.
    const uint32_t tcard = rand_card(2, 4);
    si::JointDistribution labeled = si::attach_conditional(
        base, "v1", "T", tcard,
        si::random_channel(rng, base.variables()[0].cardinality, tcard));
    si::JointDistribution full = si::attach_conditional(
        labeled, "v1", "z1", labeled.variables()[0].cardinality,
        si::copy_channel(labeled.variables()[0].cardinality));
    si::BayesBoundReport bounds = si::bayes_bounds(full, {"v1"}, {"v2"}, {"z1"}, {"T"});
    ordering.update(std::max(bounds.sufficient_bound - bounds.minimal_bound, 0.0));
  }

  for (int k = 0; k < 20; ++k) {
    const double w = rng.uniform(-3.0, 3.0);
    const double s2 = rng.uniform(0.1, 4.0);
    // E over v~N(0,1) of KL(N(w v, s^2) || N(0,1)) via the two-point
    // quadrature v = ±1, exact for this integrand; must dominate I(v;z).
    si::Tape<double> tape;
    si::Tensor<double> mu({2, 1});
    mu.data = {w, -w};
    si::Var<double> bound = si::gaussian_kl(
        tape.constant(std::move(mu)),
        tape.constant(si::Tensor<double>::full({2, 1}, std::log(s2))));
    const double gap =
        bound.value().data[0] - si::gaussian_linear_mi(w, std::sqrt(s2));
    channel.update(std::max(-gap, 0.0));
  }

  bool all_pass = true;
  for (const Suite* s : {&sym, &nonneg, &chain, &order, &split, &ordering, &channel}) {
    std::cout << (s->pass() ? "PASS" : "FAIL") << "  " << s->name
              << "  (max residual " << si::text::fmt(s->max_residual) << ", tolerance "
              << si::text::fmt(s->tolerance) << ")\n";
    all_pass = all_pass && s->pass();
  }
  return all_pass ? kExitOk : kExitCheckFailure;
}

// ---------------------------------------------------------------------------
// pretrain

int run_pretrain(const std::string& config_path, const std::string& data_prefix,
                 const std::string& out_path, const std::string& metrics_path,
                 const std::string& resume_path) {
  si::RunConfig cfg = si::RunConfig::from_file(config_path);
  si::PairedViews data = load_pair(data_prefix);

  si::Checkpoint resume;
  const si::Checkpoint* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    resume = si::load_checkpoint(resume_path);
    resume_ptr = &resume;
  }

  std::ofstream metrics(metrics_path);
  if (!metrics) throw si::ValidationError("cannot open metrics file '" + metrics_path + "'");
  si::MetricsSink sink = [&metrics](const si::MetricsRecord& r) {
    metrics << r.to_json() << "\n";
  };

  auto run = [&](auto tag) {
    using T = decltype(tag);
    si::TrainResult<T> result = si::pretrain<T>(cfg.train, data, sink, resume_ptr);
    si::save_checkpoint(result.checkpoint(cfg.train), out_path);
  };
  try {
    if (cfg.train.dtype == si::SuperInfoConfig::Dtype::F32) run(float{});
    else run(double{});
  } catch (const si::NumericError&) {
    metrics.flush();
    throw;
  }
  std::cout << "checkpoint written to " << out_path << ", metrics to " << metrics_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// probe

si::ProbeTask probe_task_from_files(const std::string& train_prefix,
                                    const std::string& test_prefix) {
  si::DatasetContainer train = si::load_container(train_prefix + ".v1.sids");
  si::DatasetContainer test = si::load_container(test_prefix + ".v1.sids");
  if (!train.has_labels() || !test.has_labels()) {
    throw si::ValidationError("probe datasets must carry labels");
  }
  return si::ProbeTask{std::move(train.samples), std::move(train.labels),
                       std::move(test.samples), std::move(test.labels)};
}

int run_probe(const std::string& ckpt_path, const std::string& train_prefix,
              const std::string& test_prefix, const std::string& out_path,
              const si::ProbeConfig& pcfg) {
  si::Checkpoint ckpt = si::load_checkpoint(ckpt_path);
  si::ProbeTask task = probe_task_from_files(train_prefix, test_prefix);

  const si::NamedTensor* probe_dtype = ckpt.find("f.0.w");
  if (!probe_dtype) throw si::ValidationError("checkpoint has no encoder tensors");
  si::ProbeResult result;
  if (probe_dtype->dtype == 0) {
    auto bundle = si::bundle_from_checkpoint<float>(ckpt);
    result = si::probe_task(bundle, task, pcfg);
  } else {
    auto bundle = si::bundle_from_checkpoint<double>(ckpt);
    result = si::probe_task(bundle, task, pcfg);
  }

  std::ofstream out(out_path);
  if (!out) throw si::ValidationError("cannot open output '" + out_path + "'");
  out << result.to_json() << "\n";
  std::cout << "accuracy " << si::text::fmt(result.accuracy) << " written to " << out_path
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate

std::vector<si::LossWeights> parse_grid(const std::string& grid, double tau) {
  std::vector<si::LossWeights> out;
  std::stringstream tuples(grid);
  std::string tuple;
  while (std::getline(tuples, tuple, ';')) {
    if (tuple.empty()) continue;
    std::vector<double> vals;
    std::stringstream parts(tuple);
    std::string part;
    while (std::getline(parts, part, ',')) {
      vals.push_back(si::text::parse_double(part, "grid coefficient"));
    }
    if (vals.size() != 4) {
      throw si::ValidationError("grid tuple '" + tuple + "' must have four coefficients");
    }
    si::LossWeights w{vals[0], vals[1], vals[2], vals[3], tau};
    w.validate();
    out.push_back(w);
  }
  if (out.empty()) throw si::ValidationError("grid is empty");
  return out;
}

struct AblateRun {
  si::LossWeights weights;
  uint64_t seed;
};

/// One pretrain+probe pipeline; used by both ablate workers and tests.
std::pair<double, double> ablate_one(const si::RunConfig& cfg, const si::LossWeights& weights,
                                     uint64_t run_seed) {
  si::SyntheticTask task = si::SyntheticTask::build(cfg.synth);
  si::Rng data_rng = si::Rng::stream(run_seed, "data");
  si::PairedViews train = task.sample(cfg.synth.n_samples, data_rng);
  si::PairedViews probe_train = task.sample(cfg.probe_n_train, data_rng);
  si::PairedViews probe_test = task.sample(cfg.probe_n_test, data_rng);

  si::SuperInfoConfig tcfg = cfg.train;
  tcfg.weights = weights;
  tcfg.seed = run_seed;
  si::TrainResult<float> result = si::pretrain<float>(tcfg, train, nullptr);

  si::ProbeConfig pcfg = cfg.probe;
  pcfg.seed = run_seed;
  const double source_acc =
      si::probe_task(result.bundle,
                     si::ProbeTask{probe_train.v1, probe_train.labels, probe_test.v1,
                                   probe_test.labels},
                     pcfg)
          .accuracy;

  double transfer_sum = 0.0;
  for (uint64_t code : cfg.transfer_code_seeds) {
    si::SyntheticSpec tspec = cfg.synth;
    tspec.code_seed = code;
    si::SyntheticTask ttask = si::SyntheticTask::build(tspec);
    si::Rng trng = si::Rng::stream(run_seed, "data:transfer:" + si::text::fmt(code));
    si::PairedViews ttrain = ttask.sample(cfg.probe_n_train, trng);
    si::PairedViews ttest = ttask.sample(cfg.probe_n_test, trng);
    transfer_sum += si::probe_task(result.bundle,
                                   si::ProbeTask{ttrain.v1, ttrain.labels, ttest.v1,
                                                 ttest.labels},
                                   pcfg)
                        .accuracy;
  }
  const double transfer_mean = cfg.transfer_code_seeds.empty()
                                   ? source_acc
                                   : transfer_sum / double(cfg.transfer_code_seeds.size());
  return {source_acc, transfer_mean};
}

int run_ablate(const std::string& config_path, const std::string& grid,
               uint64_t n_seeds, const std::string& out_path) {
  si::RunConfig cfg = si::RunConfig::from_file(config_path);
  std::vector<si::LossWeights> tuples = parse_grid(grid, cfg.train.weights.tau);
  if (n_seeds == 0) throw si::ValidationError("ablate needs at least one seed");

  std::vector<AblateRun> runs;
  for (const auto& w : tuples) {
    for (uint64_t i = 0; i < n_seeds; ++i) runs.push_back({w, cfg.seed + i});
  }

  std::vector<std::string> rows(runs.size());
  const size_t n_threads = std::min(env_threads(), runs.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      auto [source_acc, transfer_mean] = ablate_one(cfg, runs[i].weights, runs[i].seed);
      const auto& w = runs[i].weights;
      rows[i] = si::text::fmt(w.lambda1) + "," + si::text::fmt(w.lambda2) + "," +
                si::text::fmt(w.lambda3) + "," + si::text::fmt(w.lambda4) + "," +
                si::text::fmt(runs[i].seed) + "," + si::text::fmt(source_acc) + "," +
                si::text::fmt(transfer_mean);
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::ofstream out(out_path);
  if (!out) throw si::ValidationError("cannot open output '" + out_path + "'");
  out << "lambda1,lambda2,lambda3,lambda4,seed,source_acc,transfer_acc_mean\n";
  for (const auto& row : rows) out << row << "\n";
  std::cout << rows.size() << " ablation rows written to " << out_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct EpochAgg {
  double l_cl = 0, l_kl_1 = 0, l_kl_2 = 0, l_re_1 = 0, l_re_2 = 0, l_total = 0,
         grad_norm = 0;
  size_t steps = 0;
};

int run_report(const std::string& metrics_path, const std::string& out_path,
               const std::string& format) {
  std::ifstream in(metrics_path);
  if (!in) throw si::ValidationError("cannot open metrics file '" + metrics_path + "'");
  std::map<int64_t, EpochAgg> epochs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw si::ValidationError("metrics line " + std::to_string(line_no) + " is not JSON");
    }
    if (!rec.contains("epoch") || !rec.contains("step")) {
      throw si::ValidationError("metrics line " + std::to_string(line_no) +
                                " lacks epoch/step");
    }
    if (rec["step"].get<int64_t>() < 0) continue;  // per-epoch summaries are derived here
    EpochAgg& agg = epochs[rec["epoch"].get<int64_t>()];
    auto field = [&rec](const char* key) {
      return rec.contains(key) && rec[key].is_number() ? rec[key].get<double>() : 0.0;
    };
    agg.l_cl += field("l_cl");
    agg.l_kl_1 += field("l_kl_1");
    agg.l_kl_2 += field("l_kl_2");
    agg.l_re_1 += field("l_re_1");
    agg.l_re_2 += field("l_re_2");
    agg.l_total += field("l_total");
    agg.grad_norm += field("grad_norm");
    agg.steps += 1;
  }
  if (epochs.empty()) throw si::ValidationError("metrics file has no step records");

  std::ofstream out(out_path);
  if (!out) throw si::ValidationError("cannot open output '" + out_path + "'");

  if (format == "csv") {
    out << "epoch,l_cl,l_kl_1,l_kl_2,l_re_1,l_re_2,l_total,grad_norm\n";
    for (const auto& [epoch, agg] : epochs) {
      const double inv = 1.0 / double(agg.steps);
      out << epoch << "," << si::text::fmt(agg.l_cl * inv) << ","
          << si::text::fmt(agg.l_kl_1 * inv) << "," << si::text::fmt(agg.l_kl_2 * inv) << ","
          << si::text::fmt(agg.l_re_1 * inv) << "," << si::text::fmt(agg.l_re_2 * inv) << ","
          << si::text::fmt(agg.l_total * inv) << "," << si::text::fmt(agg.grad_norm * inv)
          << "\n";
    }
  } else if (format == "svg") {
    std::vector<double> total, cl;
    for (const auto& [epoch, agg] : epochs) {
      total.push_back(agg.l_total / double(agg.steps));
      cl.push_back(agg.l_cl / double(agg.steps));
    }
    double lo = total[0], hi = total[0];
    for (const auto& series : {total, cl}) {
      for (double v : series) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi <= lo) hi = lo + 1.0;
    const double width = 640, height = 400, margin = 40;
    auto sx = [&](size_t i) {
      return total.size() < 2
                 ? margin
                 : margin + (width - 2 * margin) * double(i) / double(total.size() - 1);
    };
    auto sy = [&](double v) {
      return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo);
    };
    auto polyline = [&](const std::vector<double>& series, const char* color) {
      std::string pts;
      for (size_t i = 0; i < series.size(); ++i) {
        pts += si::text::fmt(sx(i)) + "," + si::text::fmt(sy(series[i])) + " ";
      }
      return "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    };
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n"
        << "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n"
        << "  <line x1=\"40\" y1=\"360\" x2=\"600\" y2=\"360\" stroke=\"black\"/>\n"
        << "  <line x1=\"40\" y1=\"40\" x2=\"40\" y2=\"360\" stroke=\"black\"/>\n"
        << polyline(total, "#d62728") << polyline(cl, "#1f77b4")
        << "  <text x=\"48\" y=\"56\" font-size=\"12\">total loss (red), contrastive term "
           "(blue), per epoch</text>\n"
        << "</svg>\n";
  } else {
    throw si::ValidationError("format must be csv or svg");
  }
  std::cout << "report written to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale contrastive learning lab with exact information checks"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a paired-view synthetic dataset");
  gen->add_option("--spec", gen_args.spec_path, "run config file")->required();
  gen->add_option("--out", gen_args.out_prefix, "output path prefix")->required();
  CLI::Option* seed_opt = gen->add_option("--seed", gen_args.seed, "override the config seed");

  uint64_t mi_trials = 100, mi_seed = 1;
  std::string mi_joint;
  CLI::App* mi = app.add_subcommand("mi-check", "run the information-identity check suites");
  mi->add_option("--trials", mi_trials, "random joints per suite");
  mi->add_option("--seed", mi_seed, "suite rng seed");
  mi->add_option("--joint", mi_joint, "also validate a joint-distribution CSV");

  std::string pre_config, pre_data, pre_out, pre_metrics, pre_resume;
  CLI::App* pre = app.add_subcommand("pretrain", "train the five networks");
  pre->add_option("--config", pre_config, "run config file")->required();
  pre->add_option("--data", pre_data, "dataset prefix (expects <prefix>.v1.sids/.v2.sids)")
      ->required();
  pre->add_option("--out", pre_out, "checkpoint output path")->required();
  pre->add_option("--metrics", pre_metrics, "metrics JSONL output path")->required();
  pre->add_option("--resume", pre_resume, "checkpoint to resume from");

  std::string probe_ckpt, probe_train, probe_test, probe_out;
  si::ProbeConfig probe_cfg;
  CLI::App* probe = app.add_subcommand("probe", "linear evaluation on frozen features");
  probe->add_option("--ckpt", probe_ckpt, "checkpoint path")->required();
  probe->add_option("--train", probe_train, "train dataset prefix")->required();
  probe->add_option("--test", probe_test, "test dataset prefix")->required();
  probe->add_option("--out", probe_out, "result JSON path")->required();
  probe->add_option("--lr", probe_cfg.learning_rate, "probe learning rate");
  probe->add_option("--iters", probe_cfg.iterations, "probe iterations");
  probe->add_option("--seed", probe_cfg.seed, "probe seed (recorded in the result)");

  std::string ab_config, ab_grid, ab_out;
  uint64_t ab_seeds = 10;
  CLI::App* ab = app.add_subcommand("ablate", "pretrain+probe over a coefficient grid");
  ab->add_option("--config", ab_config, "run config file")->required();
  ab->add_option("--grid", ab_grid, "semicolon-separated lambda tuples, e.g. \"0.01,0.01,0.1,0.1;0,0,0,0\"")
      ->required();
  ab->add_option("--seeds", ab_seeds, "seeds per tuple (config seed, +1, ...)");
  ab->add_option("--out", ab_out, "CSV output path")->required();

  std::string rep_metrics, rep_out, rep_format = "csv";
  CLI::App* rep = app.add_subcommand("report", "aggregate metrics into CSV or SVG");
  rep->add_option("--metrics", rep_metrics, "metrics JSONL path")->required();
  rep->add_option("--out", rep_out, "output path")->required();
  rep->add_option("--format", rep_format, "csv or svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitBadInput;
  }

  try {
    if (gen->parsed()) {
      gen_args.seed_given = seed_opt->count() > 0;
      return run_gen_data(gen_args);
    }
    if (mi->parsed()) return run_mi_check(mi_trials, mi_seed, mi_joint);
    if (pre->parsed()) return run_pretrain(pre_config, pre_data, pre_out, pre_metrics, pre_resume);
    if (probe->parsed()) return run_probe(probe_ckpt, probe_train, probe_test, probe_out, probe_cfg);
    if (ab->parsed()) return run_ablate(ab_config, ab_grid, ab_seeds, ab_out);
    if (rep->parsed()) return run_report(rep_metrics, rep_out, rep_format);
  } catch (const si::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const si::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
