// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fibereq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fibereq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fibereq/csv.hpp"
#include "fibereq/dsp.hpp"
#include "fibereq/metrics.hpp"

namespace fibereq::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string power_tag(double p) {
  std::ostringstream os;
  os << (p < 0 ? "m" : "p") << std::fixed << std::setprecision(1) << std::abs(p);
  return os.str();
}

std::string cell_tag(const std::string& family, int level, bool retrained) {
  return family + "-" + std::to_string(level) + (retrained ? "-retrained" : "-frozen");
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  write_file_atomic(path, text);
}

std::optional<json> read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;  // a damaged result is recomputed
  }
}

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

// Runs fn(i) for i in [0, n) on `threads` workers; rethrows the first error.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

json history_json(const std::vector<nn::EpochRecord>& h) {
  json a = json::array();
  for (const auto& r : h) {
    a.push_back({r.epoch, std::isfinite(r.train_loss) ? json(r.train_loss) : json(nullptr), r.val_ber,
                 std::isfinite(r.val_q_db) ? json(r.val_q_db) : json(nullptr)});
  }
  return a;
}

std::vector<nn::EpochRecord> history_from(const json& a) {
  std::vector<nn::EpochRecord> h;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : a) {
    nn::EpochRecord e;
    e.epoch = r[0].get<int>();
    e.train_loss = r[1].is_null() ? nan : r[1].get<double>();
    e.val_ber = r[2].get<double>();
    e.val_q_db = r[3].is_null() ? q_factor(e.val_ber) : r[3].get<double>();
    h.push_back(e);
  }
  return h;
}

std::string qpoints_csv(const std::vector<QPoint>& pts) {
  std::ostringstream os;
  os << csv_schema_line() << "\npower_dbm,method,val_q_db,test_ber,test_q_db,xi\n";
  for (const auto& p : pts) {
    os << format_double(p.power_dbm) << ',' << p.method << ',' << format_double(p.val_q_db) << ','
       << format_double(p.test_ber) << ',' << format_double(p.test_q_db) << ','
       << format_double(p.xi) << '\n';
  }
  return os.str();
}

double seq_q(const nn::EqualizerModel& m, const nn::SequenceData& s,
             nn::Precision precision = nn::Precision::Single) {
  return q_factor(nn::evaluate_ber(m, s, precision));
}

}  // namespace

// ---------------------------------------------------------------- layout

std::string RunLayout::dataset(double p) const { return root + "/datasets/" + power_tag(p) + ".fbd"; }
std::string RunLayout::data_stamp() const { return root + "/datasets/stamp.json"; }
std::string RunLayout::model(nn::Architecture a, double p) const {
  return root + "/models/" + nn::to_string(a) + "/" + power_tag(p) + ".fbw";
}
std::string RunLayout::history(nn::Architecture a, double p) const {
  return root + "/models/" + nn::to_string(a) + "/" + power_tag(p) + ".json";
}
std::string RunLayout::cell(const std::string& f, int level, bool r) const {
  return root + "/sweep/" + cell_tag(f, level, r) + ".json";
}
std::string RunLayout::cell_model(const std::string& f, int level, bool r) const {
  return root + "/sweep/" + cell_tag(f, level, r) + ".fbw";
}
std::string RunLayout::baselines_csv() const { return root + "/results/baselines.csv"; }
std::string RunLayout::baselines_stamp() const { return root + "/results/baselines.json"; }
std::string RunLayout::nn_csv(nn::Architecture a) const {
  return root + "/results/" + nn::to_string(a) + ".csv";
}
std::string RunLayout::quantize_csv() const { return root + "/results/quantize.csv"; }
std::string RunLayout::quantized_model() const { return root + "/models/quantized-pwl-3.fbw"; }
std::string RunLayout::manifest() const { return root + "/manifest.json"; }
std::string RunLayout::report_dir() const { return root + "/report"; }

// ---------------------------------------------------------------- helpers

Coverage covered(const nn::ModelDims& d, std::size_t len) {
  require(len >= static_cast<std::size_t>(d.window), "split shorter than one window");
  const std::size_t n_out = static_cast<std::size_t>(d.n_out());
  const std::size_t windows = (len - static_cast<std::size_t>(d.window)) / n_out + 1;
  return {static_cast<std::size_t>(d.offset()), windows * n_out};
}

double covered_ber(const SymbolBlock& rx, const SymbolBlock& tx, std::size_t begin,
                   const Coverage& cov) {
  const std::size_t s = begin + cov.first;
  require(s + cov.count <= rx.size() && s + cov.count <= tx.size(), "coverage exceeds the block");
  return ber(std::span<const cplx>(rx.h).subspan(s, cov.count),
             std::span<const std::uint8_t>(tx.bits_h).subspan(s * kBitsPerSymbol, cov.count * kBitsPerSymbol));
}

double calibrate_noise_sigma(const std::vector<SymbolBlock>& clean, const SymbolBlock& tx,
                             const std::vector<double>& powers, std::size_t begin,
                             std::size_t count, double target_q_db, std::uint64_t seed) {
  require(clean.size() == powers.size() && !clean.empty(), "one block per power required");
  require(target_q_db > 0.0, "target Q must be positive");
  // Same draw order as add_transceiver_noise: (re, im) pairs, H first.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CVec unit(begin + count);
  for (auto& z : unit) {
    const double re = normal(rng);
    const double im = normal(rng);
    z = cplx(re, im);
  }
  const auto bits = std::span<const std::uint8_t>(tx.bits_h).subspan(begin * kBitsPerSymbol, count * kBitsPerSymbol);
  auto peak_q = [&](double sigma0) {
    double best = -std::numeric_limits<double>::infinity();
    CVec noisy(count);
    for (std::size_t k = 0; k < clean.size(); ++k) {
      const double s = noise_sigma_at(sigma0, powers[k]) / std::sqrt(2.0);
      for (std::size_t i = 0; i < count; ++i) noisy[i] = clean[k].h[begin + i] + unit[begin + i] * s;
      best = std::max(best, q_factor(ber(noisy, bits)));
    }
    return best;
  };
  double lo = 1e-4;
  double hi = 10.0;
  if (peak_q(lo) < target_q_db) {
    throw NumericError("the noise-free CDC Q is already below the calibration target");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (peak_q(mid) > target_q_db) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

Propagated propagate(const ExperimentConfig& cfg, double power_dbm) {
  const auto& sig = cfg.signal;
  Propagated out;
  out.transmitted =
      make_symbol_block(std::size_t{1} << sig.log2_symbols, cfg.seeds.bits, sig.symbol_rate_bd);
  SignalFrame frame = rrc_shape(out.transmitted, sig.rolloff, sig.sps);
  set_launch_power(frame, power_dbm);
  out.waveform = ssfm_propagate(frame, cfg.link, cfg.seeds.ase);
  const CdcFilter filter = design_cdc(cfg.link, sig.cdc_taps, out.waveform.sample_rate_hz,
                                      (1.0 + sig.rolloff) * sig.symbol_rate_bd);
  const SymbolBlock rx = matched_filter_downsample(apply_cdc(out.waveform, filter), sig.rolloff);
  out.cdc = normalize_kdsp(rx, out.transmitted).symbols;
  return out;
}

SymbolBlock dbp_receive(const Dataset& ds, const DbpSettings& settings, double xi) {
  require(ds.waveform.has_value(), "dataset has no stored waveform for DBP");
  const SignalFrame& w = *ds.waveform;
  DbpConfig dc;
  dc.steps_per_span = settings.steps_per_span;
  dc.xi = xi;
  const SignalFrame low = resample_fft(w, settings.sps * w.symbol_rate_bd);
  dc.sps = low.sps();
  const SignalFrame back = resample_fft(dbp(low, ds.meta.link, dc), w.sample_rate_hz);
  const SymbolBlock rx = matched_filter_downsample(back, ds.meta.rolloff);
  const SymbolBlock norm = normalize_kdsp(rx, ds.transmitted).symbols;
  return add_transceiver_noise(norm, ds.meta.noise_sigma, ds.meta.noise_seed);
}

// ---------------------------------------------------------------- generate

GenerateSummary cmd_generate(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  const RunLayout L{cfg.output_dir};
  const std::string hash = config_hash(cfg, Stage::Data);
  GenerateSummary summary;
  for (double p : cfg.powers_dbm) summary.files.push_back(L.dataset(p));

  if (auto stamp = read_json(L.data_stamp()); stamp && stamp->value("hash", "") == hash) {
    const bool all = std::all_of(summary.files.begin(), summary.files.end(),
                                 [](const std::string& f) { return fs::exists(f); });
    if (all) {
      summary.sigma_0dbm = stamp->value("sigma_0dbm", 0.0);
      summary.reused = true;
      say(log, "datasets up to date (" + hash + ")");
      return summary;
    }
  }

  const std::size_t n = cfg.powers_dbm.size();
  std::vector<Propagated> prop(n);
  parallel_for(n, cfg.threads, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    prop[k] = propagate(cfg, cfg.powers_dbm[k]);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    say(log, "propagated " + format_double(cfg.powers_dbm[k]) + " dBm in " +
                 std::to_string(static_cast<int>(dt)) + " s");
  });

  DatasetMeta meta;
  meta.link = cfg.link;
  meta.symbol_rate_bd = cfg.signal.symbol_rate_bd;
  meta.rolloff = cfg.signal.rolloff;
  meta.sps = cfg.signal.sps;
  meta.bit_seed = cfg.seeds.bits;
  meta.ase_seed = cfg.seeds.ase;
  meta.noise_seed = cfg.seeds.noise;
  meta.guard = cfg.split.guard;
  meta.train = cfg.split.train;
  meta.validation = cfg.split.validation;
  meta.test = cfg.split.test;

  double sigma0 = cfg.noise.sigma_0dbm;
  if (cfg.noise.target_cdc_peak_q_db > 0.0) {
    std::vector<SymbolBlock> clean;
    for (auto& p : prop) clean.push_back(p.cdc);
    const auto [vb, vc] = meta.range(Split::Validation);
    sigma0 = calibrate_noise_sigma(clean, prop.front().transmitted, cfg.powers_dbm, vb, vc,
                                   cfg.noise.target_cdc_peak_q_db, cfg.seeds.noise);
    say(log, "calibrated transceiver noise: sigma at 0 dBm = " + format_double(sigma0));
  }
  summary.sigma_0dbm = sigma0;

  for (std::size_t k = 0; k < n; ++k) {
    Dataset ds;
    ds.meta = meta;
    ds.meta.launch_power_dbm = cfg.powers_dbm[k];
    ds.meta.noise_sigma = noise_sigma_at(sigma0, cfg.powers_dbm[k]);
    ds.transmitted = std::move(prop[k].transmitted);
    ds.received = add_transceiver_noise(prop[k].cdc, ds.meta.noise_sigma, ds.meta.noise_seed);
    ds.waveform = std::move(prop[k].waveform);
    ensure_parent(summary.files[k]);
    save_dataset(summary.files[k], ds);
  }
  write_text(L.data_stamp(), json{{"hash", hash}, {"sigma_0dbm", sigma0}}.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------- baselines

std::vector<QPoint> cmd_baselines(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  const RunLayout L{cfg.output_dir};
  const std::string hash = config_hash(cfg, Stage::Baselines);
  if (auto stamp = read_json(L.baselines_stamp());
      stamp && stamp->value("hash", "") == hash && fs::exists(L.baselines_csv())) {
    say(log, "baselines up to date (" + hash + ")");
    return read_qpoints(L.baselines_csv());
  }
  std::vector<QPoint> out(2 * cfg.powers_dbm.size());
  const auto xis = cfg.dbp.xi_grid();
  parallel_for(cfg.powers_dbm.size(), cfg.threads, [&](std::size_t k) {
    const double p = cfg.powers_dbm[k];
    const Dataset ds = load_dataset(L.dataset(p));
    const auto [vb, vc] = ds.meta.range(Split::Validation);
    const auto [tb, tc] = ds.meta.range(Split::Test);
    const Coverage vcov = covered(cfg.dims, vc);
    const Coverage tcov = covered(cfg.dims, tc);

    QPoint cdc{p, "cdc"};
    cdc.val_q_db = q_factor(covered_ber(ds.received, ds.transmitted, vb, vcov));
    cdc.test_ber = covered_ber(ds.received, ds.transmitted, tb, tcov);
    cdc.test_q_db = q_factor(cdc.test_ber);

    QPoint best{p, "dbp"};
    best.val_q_db = -std::numeric_limits<double>::infinity();
    for (double xi : xis) {
      const SymbolBlock rx = dbp_receive(ds, cfg.dbp, xi);
      const double vq = q_factor(covered_ber(rx, ds.transmitted, vb, vcov));
      if (vq > best.val_q_db) {
        best.val_q_db = vq;
        best.xi = xi;
        best.test_ber = covered_ber(rx, ds.transmitted, tb, tcov);
        best.test_q_db = q_factor(best.test_ber);
      }
    }
    say(log, "baselines " + format_double(p) + " dBm: CDC " + format_double(cdc.test_q_db) +
                 " dB, DBP " + format_double(best.test_q_db) + " dB (xi " + format_double(best.xi) + ")");
    out[2 * k] = cdc;
    out[2 * k + 1] = best;
  });
  write_text(L.baselines_csv(), qpoints_csv(out));
  write_text(L.baselines_stamp(), json{{"hash", hash}}.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- train

std::vector<QPoint> cmd_train(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  const RunLayout L{cfg.output_dir};
  const std::string hash = config_hash(cfg, Stage::Train);
  const double anchor = cfg.training.anchor_power_dbm;
  std::vector<double> order = cfg.powers_dbm;
  std::stable_sort(order.begin(), order.end(), [&](double a, double b) {
    const double da = std::abs(a - anchor), db = std::abs(b - anchor);
    return da != db ? da < db : a < b;
  });

  std::vector<QPoint> all;
  for (const auto arch : cfg.architectures) {
    std::map<double, nn::EqualizerModel> done;
    std::vector<QPoint> pts;
    for (double p : order) {
      const Dataset ds = load_dataset(L.dataset(p));
      const auto train_seq = ds.sequence(Split::Train);
      const auto val_seq = ds.sequence(Split::Validation);
      const auto test_seq = ds.sequence(Split::Test);
      nn::EqualizerModel model;
      const auto side = read_json(L.history(arch, p));
      if (side && side->value("hash", "") == hash && fs::exists(L.model(arch, p))) {
        model = load_model(L.model(arch, p));
        say(log, nn::to_string(arch) + " " + format_double(p) + " dBm: reusing trained model");
      } else {
        nn::EqualizerModel init;
        nn::TrainConfig tc = cfg.training.train;
        tc.seed = cfg.seeds.train;
        std::string from = "scratch";
        if (done.empty()) {
          init = nn::EqualizerModel::create(arch, cfg.dims, cfg.seeds.init);
        } else {
          // Nearest finished power; ties go to the one closer to the anchor.
          auto best = done.begin();
          for (auto it = done.begin(); it != done.end(); ++it) {
            const double d = std::abs(it->first - p), bd = std::abs(best->first - p);
            if (d < bd || (d == bd && std::abs(it->first - anchor) < std::abs(best->first - anchor))) best = it;
          }
          init = best->second;
          tc.max_epochs = cfg.training.warm_start_epochs;
          from = format_double(best->first) + " dBm";
        }
        const auto t0 = std::chrono::steady_clock::now();
        const std::string tag = nn::to_string(arch) + " " + format_double(p) + " dBm";
        tc.on_epoch = [&](int e, double loss, double vb) {
          if (e % 50 == 0) {
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            say(log, tag + " epoch " + std::to_string(e) + " loss " + format_double(loss) +
                         " val Q " + format_double(q_factor(vb)) + " (" + std::to_string(static_cast<int>(dt)) + " s)");
          }
        };
        say(log, tag + ": training from " + from + " for " + std::to_string(tc.max_epochs) + " epochs");
        const nn::TrainResult r = nn::train(init, train_seq, val_seq, tc);
        model = r.model;
        ensure_parent(L.model(arch, p));
        save_model(L.model(arch, p), model);
        write_text(L.history(arch, p), json{{"hash", hash},
                                             {"init", from},
                                             {"best_epoch", r.history.best_epoch},
                                             {"best_val_ber", r.history.best_val_ber},
                                             {"history", history_json(r.history.epochs)}}
                                           .dump() + "\n");
      }
      QPoint q{p, nn::to_string(arch)};
      q.val_q_db = seq_q(model, val_seq);
      q.test_ber = nn::evaluate_ber(model, test_seq);
      q.test_q_db = q_factor(q.test_ber);
      say(log, nn::to_string(arch) + " " + format_double(p) + " dBm: test Q " + format_double(q.test_q_db));
      done[p] = std::move(model);
      pts.push_back(q);
    }
    std::sort(pts.begin(), pts.end(), [](const QPoint& a, const QPoint& b) { return a.power_dbm < b.power_dbm; });
    write_text(L.nn_csv(arch), qpoints_csv(pts));
    all.insert(all.end(), pts.begin(), pts.end());
  }
  return all;
}

std::vector<QPoint> read_qpoints(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::vector<QPoint> out;
  for (const auto& row : t.rows) {
    QPoint q;
    q.power_dbm = parse_double(row[t.column("power_dbm")]);
    q.method = row[t.column("method")];
    q.val_q_db = parse_double(row[t.column("val_q_db")]);
    q.test_ber = parse_double(row[t.column("test_ber")]);
    q.test_q_db = parse_double(row[t.column("test_q_db")]);
    q.xi = parse_double(row[t.column("xi")]);
    out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------- sweep

BaseModel select_base_model(const ExperimentConfig& cfg) {
  const RunLayout L{cfg.output_dir};
  const auto& archs = cfg.architectures;
  const nn::Architecture arch =
      std::find(archs.begin(), archs.end(), nn::Architecture::BiLstmCnn) != archs.end()
          ? nn::Architecture::BiLstmCnn
          : archs.front();
  if (!fs::exists(L.nn_csv(arch))) {
    throw IoError("no training results at " + L.nn_csv(arch) + "; run train first");
  }
  const auto pts = read_qpoints(L.nn_csv(arch));
  require(!pts.empty(), "empty training results");
  const auto best = std::max_element(pts.begin(), pts.end(), [](const QPoint& a, const QPoint& b) {
    return a.val_q_db < b.val_q_db;
  });
  return {arch, best->power_dbm, load_model(L.model(arch, best->power_dbm))};
}

namespace {

struct SweepContext {
  const ExperimentConfig& cfg;
  RunLayout layout;
  std::string hash;
  BaseModel base;
  nn::SequenceData train;
  nn::SequenceData val;
  nn::SequenceData test;
};

SweepCell cell_from(const json& j) {
  SweepCell c;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  c.family = j.at("family").get<std::string>();
  c.level = j.at("level").get<int>();
  c.retrained = j.at("retrained").get<bool>();
  c.val_q_db = j.at("val_q_db").is_null() ? -std::numeric_limits<double>::infinity() : j.at("val_q_db").get<double>();
  c.test_ber = j.at("test_ber").get<double>();
  c.test_q_db = q_factor(c.test_ber);
  c.tanh_boundary = j.at("tanh_boundary").is_null() ? nan : j.at("tanh_boundary").get<double>();
  c.sigmoid_boundary = j.at("sigmoid_boundary").is_null() ? nan : j.at("sigmoid_boundary").get<double>();
  c.best_epoch = j.at("best_epoch").get<int>();
  c.history = history_from(j.at("history"));
  return c;
}

json cell_json(const SweepCell& c, const std::string& hash) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"hash", hash},
          {"family", c.family},
          {"level", c.level},
          {"retrained", c.retrained},
          {"val_q_db", num(c.val_q_db)},
          {"test_ber", c.test_ber},
          {"test_q_db", num(c.test_q_db)},
          {"tanh_boundary", num(c.tanh_boundary)},
          {"sigmoid_boundary", num(c.sigmoid_boundary)},
          {"best_epoch", c.best_epoch},
          {"history", history_json(c.history)}};
}

SweepContext make_context(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepContext ctx{cfg, RunLayout{cfg.output_dir}, config_hash(cfg, Stage::Sweep), select_base_model(cfg), {}, {}, {}};
  const Dataset ds = load_dataset(ctx.layout.dataset(ctx.base.power_dbm));
  ctx.train = ds.sequence(Split::Train);
  ctx.val = ds.sequence(Split::Validation);
  ctx.test = ds.sequence(Split::Test);
  return ctx;
}

std::optional<SweepCell> cached_cell(const SweepContext& ctx, const std::string& family, int level, bool retrained) {
  const auto j = read_json(ctx.layout.cell(family, level, retrained));
  if (!j || j->value("hash", "") != ctx.hash) return std::nullopt;
  if (retrained && !fs::exists(ctx.layout.cell_model(family, level, retrained))) return std::nullopt;
  return cell_from(*j);
}

SweepCell run_cell(const SweepContext& ctx, const std::string& family, int level, bool retrained,
                   const LogFn& log) {
  if (auto c = cached_cell(ctx, family, level, retrained)) return *c;
  const auto& cfg = ctx.cfg;
  const act::Family fam = act::family_from_string(family);
  SweepCell cell;
  cell.family = family;
  cell.level = fam == act::Family::Exact ? 0 : level;
  cell.retrained = retrained && fam != act::Family::Exact;
  require(!(fam == act::Family::Exact && retrained), "the exact reference has no retrained cell");

  act::ActivationSet set = act::make_activation_set(fam, cell.level);
  if (fam == act::Family::Taylor) {
    if (retrained) {
      // Boundaries come from the frozen-weight search of the same order.
      const SweepCell frozen = run_cell(ctx, family, level, false, log);
      set.tanh = act::make_taylor(act::Function::Tanh, level, frozen.tanh_boundary);
      set.sigmoid = act::make_taylor(act::Function::Sigmoid, level, frozen.sigmoid_boundary);
    } else if (cfg.sweep.search_taylor_boundary) {
      nn::EqualizerModel m = ctx.base.model;
      m.activations = set;
      const double at = nn::grid_search_taylor_boundary(m, ctx.val, act::Function::Tanh, level,
                                                        act::default_boundary_grid(act::Function::Tanh));
      m.activations.tanh = act::make_taylor(act::Function::Tanh, level, at);
      set.tanh = m.activations.tanh;
      if (m.architecture == nn::Architecture::BiLstmCnn) {
        const double as = nn::grid_search_taylor_boundary(
            m, ctx.val, act::Function::Sigmoid, level, act::default_boundary_grid(act::Function::Sigmoid));
        set.sigmoid = act::make_taylor(act::Function::Sigmoid, level, as);
      }
    }
    cell.tanh_boundary = std::get<act::TaylorParams>(set.tanh.params).boundary;
    cell.sigmoid_boundary = std::get<act::TaylorParams>(set.sigmoid.params).boundary;
  }

  nn::EqualizerModel model = ctx.base.model;
  model.activations = set;
  if (cell.retrained) {
    nn::TrainConfig tc = cfg.training.train;
    tc.max_epochs = cfg.sweep.retrain_epochs;
    tc.learning_rate = cfg.sweep.retrain_learning_rate;
    tc.seed = cfg.seeds.train;
    tc.patience = 0;
    const auto r = nn::retrain_with_approximation(ctx.base.model, set, ctx.train, ctx.val, tc);
    model = r.model;
    cell.history = r.history.epochs;
    cell.best_epoch = r.history.best_epoch;
    save_model(ctx.layout.cell_model(family, level, true), model);
  }
  cell.val_q_db = seq_q(model, ctx.val);
  cell.test_ber = nn::evaluate_ber(model, ctx.test);
  cell.test_q_db = q_factor(cell.test_ber);
  write_text(ctx.layout.cell(family, level, cell.retrained), cell_json(cell, ctx.hash).dump() + "\n");
  say(log, "cell " + cell_tag(family, cell.level, cell.retrained) + ": test Q " + format_double(cell.test_q_db));
  return cell;
}

}  // namespace

SweepCell cmd_retrain(const ExperimentConfig& cfg, const std::string& family, int level,
                      bool retrain, const LogFn& log) {
  const SweepContext ctx = make_context(cfg);
  return run_cell(ctx, family, level, retrain, log);
}

std::vector<SweepCell> cmd_sweep_approx(const ExperimentConfig& cfg, const LogFn& log) {
  const SweepContext ctx = make_context(cfg);
  say(log, "sweep base: " + nn::to_string(ctx.base.architecture) + " at " +
               format_double(ctx.base.power_dbm) + " dBm");
  struct Job {
    std::string family;
    int level;
  };
  std::vector<Job> jobs;
  for (int o : cfg.sweep.taylor_orders) jobs.push_back({"taylor", o});
  for (int s : cfg.sweep.pwl_segments) jobs.push_back({"pwl", s});
  for (int b : cfg.sweep.lut_bits) jobs.push_back({"lut", b});

  std::vector<SweepCell> cells;
  cells.push_back(run_cell(ctx, "exact", 0, false, log));
  std::vector<SweepCell> frozen(jobs.size()), retrained(jobs.size());
  // Frozen cells first: retrained Taylor cells reuse their boundaries.
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    frozen[i] = run_cell(ctx, jobs[i].family, jobs[i].level, false, log);
  });
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    retrained[i] = run_cell(ctx, jobs[i].family, jobs[i].level, true, log);
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    cells.push_back(frozen[i]);
    cells.push_back(retrained[i]);
  }
  return cells;
}

std::vector<SweepCell> read_cells(const ExperimentConfig& cfg) {
  const RunLayout L{cfg.output_dir};
  std::vector<SweepCell> cells;
  const fs::path dir = fs::path(L.root) / "sweep";
  if (!fs::exists(dir)) return cells;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (auto j = read_json(f.string())) cells.push_back(cell_from(*j));
  }
  const auto rank = [](const std::string& f) {
    return f == "exact" ? 0 : f == "taylor" ? 1 : f == "pwl" ? 2 : 3;
  };
  std::sort(cells.begin(), cells.end(), [&](const SweepCell& a, const SweepCell& b) {
    return std::tuple(rank(a.family), a.level, a.retrained) < std::tuple(rank(b.family), b.level, b.retrained);
  });
  return cells;
}

// ---------------------------------------------------------------- quantize

QuantizeSummary cmd_quantize(const ExperimentConfig& cfg, const LogFn& log) {
  const SweepContext ctx = make_context(cfg);
  run_cell(ctx, "pwl", 3, true, log);
  const nn::EqualizerModel model = load_model(ctx.layout.cell_model("pwl", 3, true));
  const fx::FixedPointModel fixed = fx::quantize_int32(model, cfg.frac_bits);
  save_fixed_model(ctx.layout.quantized_model(), fixed);

  QuantizeSummary s;
  s.frac_bits = cfg.frac_bits;
  s.float_q_db = seq_q(model, ctx.test, nn::Precision::Double);
  s.fixed_q_db = q_factor(nn::equalized_ber(fx::equalize_fixed(fixed, ctx.test), ctx.test));
  const std::size_t n_out = static_cast<std::size_t>(model.dims.n_out());
  for (std::size_t w = 0; w < 8 && (w * n_out + model.dims.window) <= ctx.test.size(); ++w) {
    const nn::Mat window = ctx.test.features.middleCols(static_cast<Eigen::Index>(w * n_out), model.dims.window).transpose();
    s.max_abs_output_diff = std::max(
        s.max_abs_output_diff, (fx::fixed_forward(fixed, window) - nn::forward(model, window)).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << csv_schema_line() << "\nmodel,frac_bits,float_q_db,fixed_q_db,max_abs_output_diff\n"
     << "pwl-3-retrained," << s.frac_bits << ',' << format_double(s.float_q_db) << ','
     << format_double(s.fixed_q_db) << ',' << format_double(s.max_abs_output_diff) << '\n';
  write_text(ctx.layout.quantize_csv(), os.str());
  say(log, "int32 (" + std::to_string(s.frac_bits) + " fractional bits): Q " + format_double(s.fixed_q_db) +
               " dB vs float " + format_double(s.float_q_db) + " dB");
  return s;
}

// ---------------------------------------------------------------- report

std::vector<std::string> cmd_report(const ExperimentConfig& cfg, const std::string& tables_csv,
                                    const LogFn& log) {
  const RunLayout L{cfg.output_dir};
  std::vector<std::string> written;
  const std::string dir = L.report_dir();

  std::vector<QPoint> pts;
  if (fs::exists(L.baselines_csv())) {
    const auto b = read_qpoints(L.baselines_csv());
    pts.insert(pts.end(), b.begin(), b.end());
  }
  for (auto arch : cfg.architectures) {
    if (fs::exists(L.nn_csv(arch))) {
      const auto b = read_qpoints(L.nn_csv(arch));
      pts.insert(pts.end(), b.begin(), b.end());
    }
  }
  {
    std::ostringstream os;
    os << csv_schema_line() << "\npower_dbm,method,q_db\n";
    for (const auto& p : pts) os << format_double(p.power_dbm) << ',' << p.method << ',' << format_double(p.test_q_db) << '\n';
    write_text(dir + "/q_vs_power.csv", os.str());
    written.push_back(dir + "/q_vs_power.csv");
  }

  const auto cells = read_cells(cfg);
  {
    std::ostringstream os, conv;
    os << csv_schema_line() << "\nfamily,level,retrained,q_db\n";
    conv << csv_schema_line() << "\nfamily,level,epoch,train_loss,val_q_db\n";
    for (const auto& c : cells) {
      os << c.family << ',' << c.level << ',' << (c.retrained ? 1 : 0) << ',' << format_double(c.test_q_db) << '\n';
      for (const auto& e : c.history) {
        conv << c.family << ',' << c.level << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
             << format_double(e.val_q_db) << '\n';
      }
    }
    write_text(dir + "/q_vs_approx.csv", os.str());
    write_text(dir + "/convergence.csv", conv.str());
    written.push_back(dir + "/q_vs_approx.csv");
    written.push_back(dir + "/convergence.csv");
  }

  {
    const auto rows = load_resource_rows(tables_csv);
    const auto rep = resource_table_report(rows);
    std::map<std::string, double> mults;
    for (auto arch : {nn::Architecture::BiLstmCnn, nn::Architecture::DeepCnn}) {
      const double m = nn::count_real_multipliers(nn::EqualizerModel::zeros(arch, cfg.dims)).per_symbol;
      mults[arch == nn::Architecture::BiLstmCnn ? "biLSTM+CNN" : "Deep CNN"] = m;
    }
    std::ostringstream os;
    os << csv_schema_line()
       << "\ntable,type,n_real_mults_per_symbol,clock_mhz,max_utilization,throughput_gbps,"
          "n_fpga_200g,n_fpga_400g_dual,n_fpga_400g_56gbd,max_rel_error\n";
    for (const auto& r : rows) {
      std::map<std::string, double> v;
      double worst = 0.0;
      for (const auto& c : rep.cells) {
        if (c.table == r.table && c.type == r.type) {
          v[c.column] = c.computed;
          worst = std::max(worst, std::abs(c.rel_error));
        }
      }
      const auto m = mults.find(r.type);
      os << r.table << ',' << r.type << ','
         << (m != mults.end() ? format_double(m->second) : std::string("nan")) << ','
         << format_double(r.clock_mhz) << ',' << format_double(r.max_utilization) << ','
         << format_double(v["throughput_gbps"]) << ',' << format_double(v["n_fpga_200g"]) << ','
         << format_double(v["n_fpga_400g_dual"]) << ',' << format_double(v["n_fpga_400g_56gbd"]) << ','
         << format_double(worst) << '\n';
    }
    write_text(dir + "/complexity.csv", os.str());
    written.push_back(dir + "/complexity.csv");
  }

  {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    std::map<std::string, QPoint> best;
    for (const auto& p : pts) {
      auto it = best.find(p.method);
      if (it == best.end() || p.test_q_db > it->second.test_q_db) best[p.method] = p;
    }
    os << "peak test Q per method\n";
    for (const auto& [m, p] : best) os << "  " << m << ": " << p.test_q_db << " dB at " << p.power_dbm << " dBm\n";
    if (!cells.empty()) {
      os << "approximation sweep (test Q, frozen / retrained)\n";
      std::map<std::pair<std::string, int>, std::pair<double, double>> grid;
      for (const auto& c : cells) {
        auto& g = grid.try_emplace({c.family, c.level}, std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN()).first->second;
        (c.retrained ? g.second : g.first) = c.test_q_db;
      }
      for (const auto& [k, g] : grid) os << "  " << k.first << "-" << k.second << ": " << g.first << " / " << g.second << "\n";
    }
    if (fs::exists(L.quantize_csv())) {
      const CsvTable q = read_csv(L.quantize_csv());
      if (!q.rows.empty()) {
        os << "int32 inference: Q " << parse_double(q.rows[0][q.column("fixed_q_db")]) << " dB vs float "
           << parse_double(q.rows[0][q.column("float_q_db")]) << " dB\n";
      }
    }
    write_text(dir + "/summary.txt", os.str());
    written.push_back(dir + "/summary.txt");
  }
  say(log, "report written to " + dir);
  return written;
}

// ---------------------------------------------------------------- manifest

void record_manifest(const ExperimentConfig& cfg, const std::string& command, Stage stage,
                     double wall_seconds) {
  const RunLayout L{cfg.output_dir};
  json m = read_json(L.manifest()).value_or(json::object());
  m["code_version"] = FIBEREQ_VERSION;
  m["config"] = serialize_config(cfg);
  m["seeds"] = {{"bits", cfg.seeds.bits}, {"ase", cfg.seeds.ase}, {"noise", cfg.seeds.noise},
                {"init", cfg.seeds.init}, {"train", cfg.seeds.train}};
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["commands"][command] = {{"config_hash", config_hash(cfg, stage)},
                            {"wall_seconds", wall_seconds},
                            {"finished_utc", stamp}};
  write_text(L.manifest(), m.dump(2) + "\n");
}

}  // namespace fibereq::experiment
