#pragma once

#include "ei/address.hpp"
#include "ei/demand.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ei {

struct GridNode {
    std::string id;
    EnergyIpAddress eip;
};

struct GridLine {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    double resistance_pu = 0.0;
    double rating_kw = 0.0;  // 0 = no thermal limit
};

/// Thermal unit with cost 1/2 a P^2 + b P (P in kW, cost in CNY/h).
struct Plant {
    std::string id;
    std::size_t node = 0;
    double a = 0.0;  // CNY/kWh per kW
    double b = 0.0;  // CNY/kWh
    double p_min_kw = 0.0;
    double p_max_kw = 0.0;
    double carbon_g_per_kwh = 550.0;
};

struct ElasticLoad {
    std::string id;
    std::size_t node = 0;
    std::vector<double> p0_kw;   // per period
    std::vector<double> pi0;     // per period anchor price, CNY/kWh; may be empty until anchored
    double elasticity = -1.0;    // 0 = inelastic

    bool is_elastic() const { return elasticity < 0.0; }

    DemandCurve curve(std::size_t period) const {
        return build_demand_curve(p0_kw.at(period), pi0.at(period), elasticity);
    }
};

struct Renewable {
    std::string id;
    std::size_t node = 0;
    std::vector<double> available_kw;  // per period
};

struct GridModel {
    std::vector<GridNode> nodes;
    std::vector<GridLine> lines;
    std::vector<Plant> plants;
    std::vector<ElasticLoad> loads;
    std::vector<Renewable> renewables;
    double base_kw = 1000.0;
    double period_hours = 2.0;
    std::size_t periods = 12;

    /// Errors: ConfigError (dangling indices, a <= 0, negative resistance,
    /// disconnected graph, per-period vectors of the wrong length).
    void validate() const;
    /// Errors: ConfigError.
    std::size_t node_index(std::string_view id) const;
};

enum class LoadMode { Fixed, Elastic };

struct OpfInput {
    std::size_t period = 0;
    LoadMode load_mode = LoadMode::Fixed;
    /// Fixed mode: consumption per load (empty = P0 of the period).
    std::vector<double> load_kw;
    /// Elastic mode: lower bound per load, e.g. energy already bought
    /// peer-to-peer (empty = 0).
    std::vector<double> load_min_kw;
    /// Upper bound per renewable (empty = available output).
    std::vector<double> renewable_cap_kw;
    /// Net injection per node from resources outside the optimization
    /// (storage, vehicles, committed peer-to-peer deliveries). Empty = 0.
    std::vector<double> fixed_injection_kw;
};

struct OpfSolution {
    std::size_t period = 0;
    std::vector<double> plant_kw;
    std::vector<double> renewable_kw;
    std::vector<double> load_kw;
    std::vector<double> line_flow_kw;   // measured at the from end
    std::vector<double> line_loss_kw;
    std::vector<double> node_injection_kw;
    std::vector<double> lmp;            // CNY/kWh
    double plant_cost_cny_per_h = 0.0;
    double utility_cny_per_h = 0.0;
    double total_loss_kw = 0.0;
    double balance_residual_kw = 0.0;
    double kkt_residual = 0.0;          // p.u.
    int iterations = 0;
};

/// Bitwise equality of every numeric field.
bool identical(const OpfSolution& a, const OpfSolution& b);

struct OpfOptions {
    int max_iterations = 50;
    double damping = 0.5;
    double tolerance_pu = 1e-10;
};

/// Active-power OPF with quadratic line losses (loss = r f^2 in p.u., split
/// evenly between the line's ends), solved by successive linearization of the
/// losses. Nodal prices are the balance-constraint duals.
/// Errors: Infeasible, NotConverged, BadElasticity.
OpfSolution solve_opf(const GridModel& grid, const OpfInput& input, const OpfOptions& options = {});

/// Long-form CSV rows: period,kind,id,node,kw,price
void write_opf_csv_header(std::ostream& out);
void write_opf_csv(std::ostream& out, const GridModel& grid, const OpfSolution& solution);

} // namespace ei
