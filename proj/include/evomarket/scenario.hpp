#pragma once

// Scenario configuration: strict JSON loading (unknown keys and duplicate
// keys rejected), validation, canonical serialization and hashing, and the
// built-in presets.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evomarket/common.hpp"
#include "evomarket/firm.hpp"
#include "evomarket/macro.hpp"
#include "evomarket/market.hpp"
#include "evomarket/micro.hpp"

namespace evomarket {

using nlohmann::json;

class scenario_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- pipeline-specific knobs ------------------------------------------------

enum class SizeVarianceMode { direct, correlated };

struct GibratConfig {
  std::size_t n_products = 10000;
  std::size_t n_steps = 10000;
  double initial_sales = 1.0;
};

struct ParetoTailConfig {
  std::vector<double> ratios = {0.5, 1.0, 2.0};  // A/D values
  double noise_amplitude = 1.0;                  // D
  std::size_t n_firms = 10000;
  double dt = 0.01;
  double tail_frac = 0.05;
};

struct LaplacePriceConfig {
  std::size_t n_samples = 100000;
  std::size_t burn_in = 20000;
  std::size_t thin = 5;
};

struct SizeVarianceConfig {
  SizeVarianceMode mode = SizeVarianceMode::direct;
  double beta = 0.2;        // direct mode: conditional Laplace scale ~ y^-beta
  double nu = 0.4;          // correlated mode: activity correlation exponent
  std::size_t n_products = 1200;
  std::size_t window = 256;  // deviation samples per product
  double size_min = 1.0;
  double size_max = 1000.0;
};

struct GrowthMixtureConfig {
  std::size_t n_samples = 20000;
  double beta = 0.2;      // sigma(y) = y^-beta over the size tail
  double y_m = 1.0;       // minimum size where the lognormal tail starts
  double tail_decades = 4.0;
  double r_min = 0.4;     // truncation radius for the singular mixture form
};

struct ProfitInvariantConfig {
  std::size_t n_products = 100;
  std::size_t n_times = 200;
  double alpha_jitter = 0.0;  // per-product alpha perturbation (+-)
};

struct Scenario {
  std::string name = "unnamed";
  MarketParams market;
  MicroConfig micro;
  AttachmentConfig attachment;
  LifeCycleParams lifecycle;
  MarketSizeParams market_size;
  std::vector<std::uint64_t> seeds = {1};
  std::size_t horizon = 10000;
  std::vector<std::string> outputs;  // requested analyses
  double macro_horizon = 40.0;
  std::size_t macro_grid = 400;

  GibratConfig gibrat;
  ParetoTailConfig pareto;
  LaplacePriceConfig laplace_price;
  SizeVarianceConfig size_variance;
  GrowthMixtureConfig growth_mixture;
  ProfitInvariantConfig profit;
};

inline const std::set<std::string>& known_analyses() {
  static const std::set<std::string> k = {
      "micro",          "gibrat",           "pareto_tail", "laplace_price",
      "size_variance",  "lifecycle",        "profit_invariant",
      "growth_mixture"};
  return k;
}

// --- strict JSON helpers ------------------------------------------------------

namespace detail {

// SAX consumer that rejects duplicate keys within one object.
struct DuplicateKeyChecker : nlohmann::json_sax<json> {
  std::vector<std::set<std::string>> stack;
  std::string error;

  bool key(std::string& k) override {
    if (!stack.empty() && !stack.back().insert(k).second) {
      error = "duplicate key '" + k + "'";
      return false;
    }
    return true;
  }
  bool start_object(std::size_t) override {
    stack.emplace_back();
    return true;
  }
  bool end_object() override {
    stack.pop_back();
    return true;
  }
  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_array(std::size_t) override { return true; }
  bool end_array() override { return true; }
  bool parse_error(std::size_t pos, const std::string&,
                   const nlohmann::detail::exception& ex) override {
    if (error.empty())
      error = "parse error at byte " + std::to_string(pos) + ": " + ex.what();
    return false;
  }
};

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& section, bool strict) {
  if (!strict || !obj.is_object()) return;
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k))
      throw scenario_error("unknown key '" + k + "' in section '" + section + "'");
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

// --- section parsers ------------------------------------------------------------

namespace detail {

inline void parse_market(const json& j, MarketParams& p, bool strict) {
  check_keys(j,
             {"market_potential", "upper_share", "mean_income", "natural_price",
              "demand_width", "repurchase_rate", "epsilon",
              "multiple_purchase_rate", "replacement_fraction",
              "product_lifetime", "alpha_mean"},
             "market", strict);
  read_field(j, "market_potential", p.market_potential);
  read_field(j, "upper_share", p.upper_share);
  read_field(j, "mean_income", p.mean_income);
  read_field(j, "natural_price", p.natural_price);
  read_field(j, "demand_width", p.demand_width);
  read_field(j, "repurchase_rate", p.repurchase_rate);
  read_field(j, "epsilon", p.epsilon);
  read_field(j, "multiple_purchase_rate", p.multiple_purchase_rate);
  read_field(j, "replacement_fraction", p.replacement_fraction);
  read_field(j, "product_lifetime", p.product_lifetime);
  read_field(j, "alpha_mean", p.alpha_mean);
}

inline void parse_noise(const json& j, NoiseSpec& n, bool strict,
                        const std::string& section) {
  check_keys(j, {"kind", "amplitude", "corr_exponent", "seed", "length", "dt"},
             section, strict);
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "white")
      n.kind = NoiseKind::white;
    else if (k == "correlated")
      n.kind = NoiseKind::correlated;
    else
      throw scenario_error(section + ".kind must be 'white' or 'correlated'");
  }
  read_field(j, "amplitude", n.amplitude);
  read_field(j, "corr_exponent", n.corr_exponent);
  read_field(j, "seed", n.seed);
  read_field(j, "length", n.length);
  read_field(j, "dt", n.dt);
}

inline void parse_micro(const json& j, MicroConfig& m, bool strict) {
  check_keys(j,
             {"dt", "price_noise", "fitness_noise", "restoring_strength",
              "y_floor", "record_every", "fitness_mode"},
             "micro", strict);
  read_field(j, "dt", m.dt);
  read_field(j, "restoring_strength", m.restoring_strength);
  read_field(j, "y_floor", m.y_floor);
  read_field(j, "record_every", m.record_every);
  if (j.contains("fitness_mode")) {
    const auto s = j.at("fitness_mode").get<std::string>();
    if (s == "direct")
      m.fitness_mode = FitnessMode::direct;
    else if (s == "decomposed")
      m.fitness_mode = FitnessMode::decomposed;
    else
      throw scenario_error("micro.fitness_mode must be 'direct' or 'decomposed'");
  }
  if (j.contains("price_noise"))
    parse_noise(j.at("price_noise"), m.price_noise, strict, "micro.price_noise");
  if (j.contains("fitness_noise"))
    parse_noise(j.at("fitness_noise"), m.fitness_noise, strict, "micro.fitness_noise");
}

inline void parse_attachment(const json& j, AttachmentConfig& a, bool strict) {
  check_keys(j, {"rate", "new_product_size_frac", "noise_amplitude", "mode"},
             "attachment", strict);
  read_field(j, "rate", a.rate);
  read_field(j, "new_product_size_frac", a.new_product_size_frac);
  read_field(j, "noise_amplitude", a.noise_amplitude);
  if (j.contains("mode")) {
    const auto s = j.at("mode").get<std::string>();
    if (s == "event_based")
      a.mode = AttachmentMode::event_based;
    else if (s == "sde_reduced")
      a.mode = AttachmentMode::sde_reduced;
    else
      throw scenario_error("attachment.mode must be 'event_based' or 'sde_reduced'");
  }
}

inline void parse_lifecycle(const json& j, LifeCycleParams& p, bool strict) {
  check_keys(j,
             {"price_decline_rate", "initial_price_offset", "natural_price",
              "gompertz_scale", "adopter_norm", "replacement_fraction",
              "product_lifetime", "multiple_purchase_rate", "max_echo_depth"},
             "lifecycle", strict);
  read_field(j, "price_decline_rate", p.price_decline_rate);
  read_field(j, "initial_price_offset", p.initial_price_offset);
  read_field(j, "natural_price", p.natural_price);
  read_field(j, "gompertz_scale", p.gompertz_scale);
  read_field(j, "adopter_norm", p.adopter_norm);
  read_field(j, "replacement_fraction", p.replacement_fraction);
  read_field(j, "product_lifetime", p.product_lifetime);
  read_field(j, "multiple_purchase_rate", p.multiple_purchase_rate);
  read_field(j, "max_echo_depth", p.max_echo_depth);
}

inline void parse_market_size(const json& j, MarketSizeParams& p, bool strict) {
  check_keys(j,
             {"revenue_coefficient", "firm_count_offset", "alpha_mean",
              "mean_firm_cost", "regime_threshold"},
             "market_size", strict);
  read_field(j, "revenue_coefficient", p.revenue_coefficient);
  read_field(j, "firm_count_offset", p.firm_count_offset);
  read_field(j, "alpha_mean", p.alpha_mean);
  read_field(j, "mean_firm_cost", p.mean_firm_cost);
  read_field(j, "regime_threshold", p.regime_threshold);
}

}  // namespace detail

inline Scenario parse_scenario(const json& j, bool strict = true) {
  detail::check_keys(j,
                     {"name", "market", "micro", "attachment", "lifecycle",
                      "market_size", "seeds", "horizon", "outputs",
                      "macro_horizon", "macro_grid", "gibrat", "pareto_tail",
                      "laplace_price", "size_variance", "growth_mixture",
                      "profit_invariant"},
                     "(top level)", strict);
  Scenario s;
  detail::read_field(j, "name", s.name);
  if (j.contains("market")) detail::parse_market(j.at("market"), s.market, strict);
  if (j.contains("micro")) detail::parse_micro(j.at("micro"), s.micro, strict);
  if (j.contains("attachment"))
    detail::parse_attachment(j.at("attachment"), s.attachment, strict);
  if (j.contains("lifecycle"))
    detail::parse_lifecycle(j.at("lifecycle"), s.lifecycle, strict);
  if (j.contains("market_size"))
    detail::parse_market_size(j.at("market_size"), s.market_size, strict);
  detail::read_field(j, "seeds", s.seeds);
  detail::read_field(j, "horizon", s.horizon);
  detail::read_field(j, "outputs", s.outputs);
  detail::read_field(j, "macro_horizon", s.macro_horizon);
  detail::read_field(j, "macro_grid", s.macro_grid);

  if (j.contains("gibrat")) {
    const auto& g = j.at("gibrat");
    detail::check_keys(g, {"n_products", "n_steps", "initial_sales"}, "gibrat", strict);
    detail::read_field(g, "n_products", s.gibrat.n_products);
    detail::read_field(g, "n_steps", s.gibrat.n_steps);
    detail::read_field(g, "initial_sales", s.gibrat.initial_sales);
  }
  if (j.contains("pareto_tail")) {
    const auto& g = j.at("pareto_tail");
    detail::check_keys(g, {"ratios", "noise_amplitude", "n_firms", "dt", "tail_frac"},
                       "pareto_tail", strict);
    detail::read_field(g, "ratios", s.pareto.ratios);
    detail::read_field(g, "noise_amplitude", s.pareto.noise_amplitude);
    detail::read_field(g, "n_firms", s.pareto.n_firms);
    detail::read_field(g, "dt", s.pareto.dt);
    detail::read_field(g, "tail_frac", s.pareto.tail_frac);
  }
  if (j.contains("laplace_price")) {
    const auto& g = j.at("laplace_price");
    detail::check_keys(g, {"n_samples", "burn_in", "thin"}, "laplace_price", strict);
    detail::read_field(g, "n_samples", s.laplace_price.n_samples);
    detail::read_field(g, "burn_in", s.laplace_price.burn_in);
    detail::read_field(g, "thin", s.laplace_price.thin);
  }
  if (j.contains("size_variance")) {
    const auto& g = j.at("size_variance");
    detail::check_keys(g, {"mode", "beta", "nu", "n_products", "window",
                           "size_min", "size_max"},
                       "size_variance", strict);
    if (g.contains("mode")) {
      const auto m = g.at("mode").get<std::string>();
      if (m == "direct")
        s.size_variance.mode = SizeVarianceMode::direct;
      else if (m == "correlated")
        s.size_variance.mode = SizeVarianceMode::correlated;
      else
        throw scenario_error("size_variance.mode must be 'direct' or 'correlated'");
    }
    detail::read_field(g, "beta", s.size_variance.beta);
    detail::read_field(g, "nu", s.size_variance.nu);
    detail::read_field(g, "n_products", s.size_variance.n_products);
    detail::read_field(g, "window", s.size_variance.window);
    detail::read_field(g, "size_min", s.size_variance.size_min);
    detail::read_field(g, "size_max", s.size_variance.size_max);
  }
  if (j.contains("growth_mixture")) {
    const auto& g = j.at("growth_mixture");
    detail::check_keys(g, {"n_samples", "beta", "y_m", "tail_decades", "r_min"},
                       "growth_mixture", strict);
    detail::read_field(g, "n_samples", s.growth_mixture.n_samples);
    detail::read_field(g, "beta", s.growth_mixture.beta);
    detail::read_field(g, "y_m", s.growth_mixture.y_m);
    detail::read_field(g, "tail_decades", s.growth_mixture.tail_decades);
    detail::read_field(g, "r_min", s.growth_mixture.r_min);
  }
  if (j.contains("profit_invariant")) {
    const auto& g = j.at("profit_invariant");
    detail::check_keys(g, {"n_products", "n_times", "alpha_jitter"},
                       "profit_invariant", strict);
    detail::read_field(g, "n_products", s.profit.n_products);
    detail::read_field(g, "n_times", s.profit.n_times);
    detail::read_field(g, "alpha_jitter", s.profit.alpha_jitter);
  }

  // Validation.
  s.market.validate();
  s.micro.validate();
  s.attachment.validate();
  s.lifecycle.validate();
  s.market_size.validate();
  if (s.seeds.empty()) throw scenario_error("seeds must be non-empty");
  for (const auto& a : s.outputs)
    if (!known_analyses().count(a))
      throw scenario_error("unknown analysis '" + a + "'");
  return s;
}

inline Scenario load_scenario(const std::string& path, bool strict = true) {
  std::ifstream in(path);
  if (!in) throw scenario_error("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  detail::DuplicateKeyChecker checker;
  if (!json::sax_parse(text, &checker))
    throw scenario_error(path + ": " + checker.error);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw scenario_error(path + ": " + e.what());
  }
  try {
    return parse_scenario(j, strict);
  } catch (const domain_error& e) {
    throw scenario_error(path + ": validation error: " + e.what());
  } catch (const json::exception& e) {
    throw scenario_error(path + ": " + e.what());
  }
}

// Canonical serialization (sorted keys; every effective value explicit).
inline json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["market"] = {{"market_potential", s.market.market_potential},
                 {"upper_share", s.market.upper_share},
                 {"mean_income", s.market.mean_income},
                 {"natural_price", s.market.natural_price},
                 {"demand_width", s.market.demand_width},
                 {"repurchase_rate", s.market.repurchase_rate},
                 {"epsilon", s.market.epsilon},
                 {"multiple_purchase_rate", s.market.multiple_purchase_rate},
                 {"replacement_fraction", s.market.replacement_fraction},
                 {"product_lifetime", s.market.product_lifetime},
                 {"alpha_mean", s.market.alpha_mean}};
  auto noise_json = [](const NoiseSpec& n) {
    return json{{"kind", n.kind == NoiseKind::white ? "white" : "correlated"},
                {"amplitude", n.amplitude},
                {"corr_exponent", n.corr_exponent},
                {"seed", n.seed},
                {"length", n.length},
                {"dt", n.dt}};
  };
  j["micro"] = {{"dt", s.micro.dt},
                {"price_noise", noise_json(s.micro.price_noise)},
                {"fitness_noise", noise_json(s.micro.fitness_noise)},
                {"restoring_strength", s.micro.restoring_strength},
                {"y_floor", s.micro.y_floor},
                {"record_every", s.micro.record_every},
                {"fitness_mode", s.micro.fitness_mode == FitnessMode::direct
                                     ? "direct"
                                     : "decomposed"}};
  j["attachment"] = {
      {"rate", s.attachment.rate},
      {"new_product_size_frac", s.attachment.new_product_size_frac},
      {"noise_amplitude", s.attachment.noise_amplitude},
      {"mode", s.attachment.mode == AttachmentMode::event_based ? "event_based"
                                                                : "sde_reduced"}};
  j["lifecycle"] = {{"price_decline_rate", s.lifecycle.price_decline_rate},
                    {"initial_price_offset", s.lifecycle.initial_price_offset},
                    {"natural_price", s.lifecycle.natural_price},
                    {"gompertz_scale", s.lifecycle.gompertz_scale},
                    {"adopter_norm", s.lifecycle.adopter_norm},
                    {"replacement_fraction", s.lifecycle.replacement_fraction},
                    {"product_lifetime", s.lifecycle.product_lifetime},
                    {"multiple_purchase_rate", s.lifecycle.multiple_purchase_rate},
                    {"max_echo_depth", s.lifecycle.max_echo_depth}};
  j["market_size"] = {{"revenue_coefficient", s.market_size.revenue_coefficient},
                      {"firm_count_offset", s.market_size.firm_count_offset},
                      {"alpha_mean", s.market_size.alpha_mean},
                      {"mean_firm_cost", s.market_size.mean_firm_cost},
                      {"regime_threshold", s.market_size.regime_threshold}};
  j["seeds"] = s.seeds;
  j["horizon"] = s.horizon;
  j["outputs"] = s.outputs;
  j["macro_horizon"] = s.macro_horizon;
  j["macro_grid"] = s.macro_grid;
  j["gibrat"] = {{"n_products", s.gibrat.n_products},
                 {"n_steps", s.gibrat.n_steps},
                 {"initial_sales", s.gibrat.initial_sales}};
  j["pareto_tail"] = {{"ratios", s.pareto.ratios},
                      {"noise_amplitude", s.pareto.noise_amplitude},
                      {"n_firms", s.pareto.n_firms},
                      {"dt", s.pareto.dt},
                      {"tail_frac", s.pareto.tail_frac}};
  j["laplace_price"] = {{"n_samples", s.laplace_price.n_samples},
                        {"burn_in", s.laplace_price.burn_in},
                        {"thin", s.laplace_price.thin}};
  j["size_variance"] = {
      {"mode", s.size_variance.mode == SizeVarianceMode::direct ? "direct"
                                                                : "correlated"},
      {"beta", s.size_variance.beta},
      {"nu", s.size_variance.nu},
      {"n_products", s.size_variance.n_products},
      {"window", s.size_variance.window},
      {"size_min", s.size_variance.size_min},
      {"size_max", s.size_variance.size_max}};
  j["growth_mixture"] = {{"n_samples", s.growth_mixture.n_samples},
                         {"beta", s.growth_mixture.beta},
                         {"y_m", s.growth_mixture.y_m},
                         {"tail_decades", s.growth_mixture.tail_decades},
                         {"r_min", s.growth_mixture.r_min}};
  j["profit_invariant"] = {{"n_products", s.profit.n_products},
                           {"n_times", s.profit.n_times},
                           {"alpha_jitter", s.profit.alpha_jitter}};
  return j;
}

// FNV-1a 64 over the canonical serialization.
inline std::string scenario_hash(const Scenario& s) {
  return fnv64_hex(scenario_to_json(s).dump());
}

// --- presets -------------------------------------------------------------------

inline std::vector<std::string> preset_names() {
  return {"gibrat-lognormal", "pareto-tail",    "laplace-price",
          "size-variance",    "lifecycle-bwtv", "profit-invariant"};
}

inline Scenario preset_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "gibrat-lognormal") {
    s.outputs = {"gibrat"};
    s.gibrat = {10000, 10000, 1.0};
    s.micro.dt = 0.01;
    // Per-step log shock std = sqrt(2*D*dt) = 0.01, comfortably inside the
    // replicator stability bound even at the sample extremes.
    s.micro.fitness_noise.amplitude = 0.005;
  } else if (name == "pareto-tail") {
    s.outputs = {"pareto_tail"};
    s.pareto.ratios = {0.5, 1.0, 2.0};
    s.pareto.n_firms = 10000;
    // Log-domain integration of the reduced SDE is exact for any dt; the
    // larger step just buys faster mixing toward stationarity.
    s.pareto.dt = 0.05;
  } else if (name == "laplace-price") {
    s.outputs = {"laplace_price"};
    s.micro.dt = 0.002;
    // Short relaxation time D/Phi^2 plus thinning keeps the retained
    // samples close to independent, which the kurtosis check needs.
    s.micro.restoring_strength = 2.0;
    s.micro.price_noise.amplitude = 0.5;
    s.laplace_price = {100000, 20000, 25};
  } else if (name == "size-variance") {
    s.outputs = {"size_variance"};
    s.size_variance.mode = SizeVarianceMode::correlated;
    s.size_variance.nu = 0.4;
    // Sizes start at 8 activity units so the aggregated windows sit in the
    // asymptotic n^-nu regime of the correlated-mean variance.
    s.size_variance.size_min = 8.0;
    s.size_variance.size_max = 512.0;
    s.size_variance.window = 128;
    s.size_variance.n_products = 1200;
  } else if (name == "lifecycle-bwtv") {
    // Qualitative B&W-TV life cycle: exponential price decline, Gompertz
    // penetration, one Juglar echo within the horizon, firm count tracking
    // revenue with B = 1.8e-5 and zero offset.
    s.outputs = {"lifecycle"};
    s.lifecycle.price_decline_rate = 0.5;
    s.lifecycle.initial_price_offset = 0.2;
    s.lifecycle.natural_price = 0.025;
    s.lifecycle.gompertz_scale = 12.0;
    s.lifecycle.replacement_fraction = 0.8;
    s.lifecycle.product_lifetime = 8.0;
    s.lifecycle.multiple_purchase_rate = 0.02;
    s.market.natural_price = s.lifecycle.natural_price;
    s.market.product_lifetime = s.lifecycle.product_lifetime;
    s.market.replacement_fraction = s.lifecycle.replacement_fraction;
    s.market_size.revenue_coefficient = 1.8e-5;
    s.market_size.firm_count_offset = 0.0;
    s.macro_horizon = 40.0;  // > 2 * t_p, at least one echo visible
    s.macro_grid = 800;
  } else if (name == "profit-invariant") {
    s.outputs = {"profit_invariant"};
    s.profit = {100, 200, 0.0};
  } else {
    throw scenario_error("unknown preset '" + name + "'");
  }
  return s;
}

}  // namespace evomarket
