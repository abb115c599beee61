#pragma once

// Time-indexed observables persisted for the stats layer and the table
// emitters.

#include <cstdint>
#include <string>
#include <vector>

namespace evomarket {

struct ProductSnapshot {
  std::uint64_t id = 0;
  double sales = 0.0;
  double inventory = 0.0;
  double price = 0.0;
  double fitness = 0.0;
};

struct FirmSnapshot {
  std::uint64_t id = 0;
  double sales = 0.0;
  std::size_t n_products = 0;
};

struct Snapshot {
  std::uint64_t tau = 0;
  double time = 0.0;  // long-time value epsilon * tau (or macro t)
  std::vector<ProductSnapshot> products;
  std::vector<FirmSnapshot> firms;
  // Aggregates.
  double total_sales = 0.0;      // y_t
  double total_supply = 0.0;     // s_t
  double mean_price = 0.0;       // <mu>
  double consumer_density = 0.0; // psi
  std::size_t n_products = 0;
  std::size_t n_firms = 0;
  double revenue = 0.0;          // R_t = <mu> * y_t
  double cost = 0.0;             // C_t
  double profit = 0.0;           // G_t
  double firm_count_model = 0.0; // N_f from the market-size relation
};

struct RunRecord {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string code_version;
  double wall_seconds = 0.0;
  std::vector<Snapshot> snapshots;
};

}  // namespace evomarket
