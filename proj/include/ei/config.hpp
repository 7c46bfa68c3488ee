#pragma once

#include "ei/address.hpp"
#include "ei/opf.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ei {

enum class ResourceType { Plant, Wind, Solar, Battery, Vehicle, UrbanLoad, RuralLoad, Isp };

std::string_view to_string(ResourceType type) noexcept;
/// Errors: ConfigError.
ResourceType parse_resource_type(std::string_view text);

bool is_renewable(ResourceType type) noexcept;
bool is_load(ResourceType type) noexcept;

struct LanSpec {
    std::string name;
    std::string node;
    std::uint32_t subnet = 0;
};

struct HostSpec {
    std::string name;
    MacAddress mac;
    std::string lan;
    std::optional<double> static_limit_kwh;
};

struct Topology {
    std::uint32_t wan = 1;
    std::vector<LanSpec> lans;
    std::vector<std::pair<std::string, std::string>> links;
    std::vector<HostSpec> hosts;

    const HostSpec* host(std::string_view name) const;
    const LanSpec* lan(std::string_view name) const;
    const LanSpec* lan_for_node(std::string_view node) const;
};

struct ResourceSpec {
    std::string name;
    ResourceType type = ResourceType::Isp;
    std::string grid_id;  // plant, load or renewable id in the grid model
    std::string node;
    double limit_weight = 0.0;

    // renewables: traditional-mode hosting cap on gross output, per period
    std::vector<double> hosting_cap_kw;

    // battery
    double capacity_kwh = 0.0;
    double power_kw = 0.0;
    std::vector<std::size_t> peak_periods;  // zero-based

    // vehicle
    double daily_kwh = 0.0;
    std::vector<double> baseline_kw;        // traditional charging schedule
    std::vector<std::size_t> available_periods;
};

/// Prices are multiples of the period's reference price (the traditional LMP
/// at the resource's node).
struct AgentParams {
    double load_extra_bid = 0.75;
    double battery_bid = 0.70;
    double vehicle_bid = 0.75;
    double renewable_surplus_ask = 0.60;
    double battery_ask = 0.97;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    std::uint32_t start_epoch = 0;
    GridModel grid;
    Topology topology;
    std::vector<ResourceSpec> resources;
    AgentParams agents;

    const ResourceSpec* resource(std::string_view name) const;
    /// Cross-checks grid, topology and roster. Errors: ConfigError.
    void validate() const;
};

/// Errors: IoError (missing or unreadable file), ConfigError (schema).
GridModel load_grid(const std::filesystem::path& path);
Topology load_topology(const std::filesystem::path& path);
/// Grid and topology references are resolved relative to the scenario file.
Scenario load_scenario(const std::filesystem::path& path);

} // namespace ei
