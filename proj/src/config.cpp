#include "ei/config.hpp"

#include "ei/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace ei {

using nlohmann::json;

std::string_view to_string(ResourceType type) noexcept {
    switch (type) {
        case ResourceType::Plant:     return "plant";
        case ResourceType::Wind:      return "wind";
        case ResourceType::Solar:     return "solar";
        case ResourceType::Battery:   return "battery";
        case ResourceType::Vehicle:   return "ev";
        case ResourceType::UrbanLoad: return "urban-load";
        case ResourceType::RuralLoad: return "rural-load";
        case ResourceType::Isp:       return "isp";
    }
    return "?";
}

ResourceType parse_resource_type(std::string_view text) {
    for (auto t : {ResourceType::Plant, ResourceType::Wind, ResourceType::Solar, ResourceType::Battery,
                   ResourceType::Vehicle, ResourceType::UrbanLoad, ResourceType::RuralLoad, ResourceType::Isp}) {
        if (to_string(t) == text) return t;
    }
    throw Error(Errc::ConfigError, "unknown resource type '" + std::string(text) + "'");
}

bool is_renewable(ResourceType type) noexcept { return type == ResourceType::Wind || type == ResourceType::Solar; }

bool is_load(ResourceType type) noexcept {
    return type == ResourceType::UrbanLoad || type == ResourceType::RuralLoad;
}

const HostSpec* Topology::host(std::string_view name) const {
    for (const auto& h : hosts) {
        if (h.name == name) return &h;
    }
    return nullptr;
}

const LanSpec* Topology::lan(std::string_view name) const {
    for (const auto& l : lans) {
        if (l.name == name) return &l;
    }
    return nullptr;
}

const LanSpec* Topology::lan_for_node(std::string_view node) const {
    for (const auto& l : lans) {
        if (l.node == node) return &l;
    }
    return nullptr;
}

const ResourceSpec* Scenario::resource(std::string_view name) const {
    for (const auto& r : resources) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

namespace {

json read_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(Errc::IoError, "file not found: " + path.string());
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
}

template <class T>
T required(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw Error(Errc::ConfigError, where + ": missing '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::ConfigError, where + ": '" + key + "' has the wrong type");
    }
}

template <class T>
T optional(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    return required<T>(j, key, where);
}

// A per-period series may be given as one number (repeated) or a full array.
std::vector<double> series(const json& j, const char* key, std::size_t periods, const std::string& where) {
    if (!j.contains(key)) return {};
    const json& v = j.at(key);
    if (v.is_number()) return std::vector<double>(periods, v.get<double>());
    if (!v.is_array()) throw Error(Errc::ConfigError, where + ": '" + key + "' must be a number or an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw Error(Errc::ConfigError, where + ": '" + key + "' has a non-numeric entry");
        out.push_back(x.get<double>());
    }
    if (out.size() != periods) {
        throw Error(Errc::ConfigError,
                    where + ": '" + key + "' needs " + std::to_string(periods) + " values, got " +
                        std::to_string(out.size()));
    }
    return out;
}

// Periods are 1-based in files.
std::vector<std::size_t> period_list(const json& j, const char* key, std::size_t periods, const std::string& where) {
    std::vector<std::size_t> out;
    for (auto p : optional<std::vector<long long>>(j, key, {}, where)) {
        if (p < 1 || static_cast<std::size_t>(p) > periods) {
            throw Error(Errc::ConfigError, where + ": period " + std::to_string(p) + " out of range");
        }
        out.push_back(static_cast<std::size_t>(p - 1));
    }
    std::sort(out.begin(), out.end());
    return out;
}

GridModel parse_grid(const json& j, const std::string& where) {
    GridModel g;
    g.base_kw = optional<double>(j, "base_kw", 1000.0, where);
    g.period_hours = optional<double>(j, "period_hours", 2.0, where);
    g.periods = optional<std::size_t>(j, "periods", 12, where);

    for (const auto& n : required<json>(j, "nodes", where)) {
        g.nodes.push_back({required<std::string>(n, "id", where + " node"), EnergyIpAddress{}});
    }
    auto node = [&](const json& item, const std::string& what) {
        return g.node_index(required<std::string>(item, "node", what));
    };
    for (const auto& l : optional<json>(j, "lines", json::array(), where)) {
        const auto id = required<std::string>(l, "id", where + " line");
        GridLine line;
        line.id = id;
        line.from = g.node_index(required<std::string>(l, "from", "line " + id));
        line.to = g.node_index(required<std::string>(l, "to", "line " + id));
        line.resistance_pu = required<double>(l, "resistance_pu", "line " + id);
        line.rating_kw = optional<double>(l, "rating_kw", 0.0, "line " + id);
        g.lines.push_back(line);
    }
    for (const auto& p : optional<json>(j, "plants", json::array(), where)) {
        const auto id = required<std::string>(p, "id", where + " plant");
        Plant plant;
        plant.id = id;
        plant.node = node(p, "plant " + id);
        plant.a = required<double>(p, "a", "plant " + id);
        plant.b = required<double>(p, "b", "plant " + id);
        plant.p_min_kw = optional<double>(p, "p_min_kw", 0.0, "plant " + id);
        plant.p_max_kw = required<double>(p, "p_max_kw", "plant " + id);
        plant.carbon_g_per_kwh = optional<double>(p, "carbon_g_per_kwh", 550.0, "plant " + id);
        g.plants.push_back(plant);
    }
    for (const auto& l : optional<json>(j, "loads", json::array(), where)) {
        const auto id = required<std::string>(l, "id", where + " load");
        ElasticLoad load;
        load.id = id;
        load.node = node(l, "load " + id);
        load.p0_kw = series(l, "p0_kw", g.periods, "load " + id);
        if (load.p0_kw.empty()) throw Error(Errc::ConfigError, "load " + id + ": missing 'p0_kw'");
        load.pi0 = series(l, "pi0", g.periods, "load " + id);
        load.elasticity = optional<double>(l, "elasticity", 0.0, "load " + id);
        g.loads.push_back(load);
    }
    for (const auto& r : optional<json>(j, "renewables", json::array(), where)) {
        const auto id = required<std::string>(r, "id", where + " renewable");
        Renewable ren;
        ren.id = id;
        ren.node = node(r, "renewable " + id);
        ren.available_kw = series(r, "available_kw", g.periods, "renewable " + id);
        if (ren.available_kw.empty()) throw Error(Errc::ConfigError, "renewable " + id + ": missing 'available_kw'");
        g.renewables.push_back(ren);
    }
    g.validate();
    return g;
}

Topology parse_topology(const json& j, const std::string& where) {
    Topology t;
    t.wan = optional<std::uint32_t>(j, "wan", 1, where);
    for (const auto& l : required<json>(j, "lans", where)) {
        LanSpec lan;
        lan.name = required<std::string>(l, "name", where + " lan");
        lan.node = required<std::string>(l, "node", "lan " + lan.name);
        lan.subnet = required<std::uint32_t>(l, "subnet", "lan " + lan.name);
        t.lans.push_back(lan);
    }
    for (const auto& link : optional<json>(j, "links", json::array(), where)) {
        const auto pair = link.get<std::vector<std::string>>();
        if (pair.size() != 2) throw Error(Errc::ConfigError, where + ": each link joins exactly two LANs");
        if (!t.lan(pair[0]) || !t.lan(pair[1])) {
            throw Error(Errc::ConfigError, where + ": link references an unknown LAN");
        }
        t.links.emplace_back(pair[0], pair[1]);
    }
    std::set<MacAddress> macs;
    for (const auto& h : required<json>(j, "hosts", where)) {
        HostSpec host;
        host.name = required<std::string>(h, "name", where + " host");
        try {
            host.mac = MacAddress::parse(required<std::string>(h, "mac", "host " + host.name));
        } catch (const Error& e) {
            throw Error(Errc::ConfigError, "host " + host.name + ": " + e.what());
        }
        host.lan = required<std::string>(h, "lan", "host " + host.name);
        if (!t.lan(host.lan)) throw Error(Errc::ConfigError, "host " + host.name + " is on unknown LAN " + host.lan);
        if (h.contains("static_limit_kwh")) host.static_limit_kwh = required<double>(h, "static_limit_kwh", host.name);
        if (!macs.insert(host.mac).second) throw Error(Errc::ConfigError, "duplicate MAC on host " + host.name);
        t.hosts.push_back(host);
    }
    return t;
}

json resolve(const json& j, const char* key, const std::filesystem::path& base, std::string& where) {
    const json& ref = required<json>(j, key, where);
    if (ref.is_string()) {
        const auto path = base / ref.get<std::string>();
        where = path.string();
        return read_json(path);
    }
    where += std::string(" ") + key;
    return ref;
}

} // namespace

GridModel load_grid(const std::filesystem::path& path) { return parse_grid(read_json(path), path.string()); }

Topology load_topology(const std::filesystem::path& path) {
    return parse_topology(read_json(path), path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
    const json j = read_json(path);
    const std::string where = path.string();
    const auto base = path.parent_path();
    Scenario s;
    s.name = optional<std::string>(j, "name", path.stem().string(), where);
    s.seed = optional<std::uint64_t>(j, "seed", 1, where);
    s.start_epoch = optional<std::uint32_t>(j, "start_epoch", 0, where);

    std::string grid_where = where;
    s.grid = parse_grid(resolve(j, "grid", base, grid_where), grid_where);
    std::string topo_where = where;
    s.topology = parse_topology(resolve(j, "topology", base, topo_where), topo_where);

    if (j.contains("agents")) {
        const json& a = j.at("agents");
        s.agents.load_extra_bid = optional<double>(a, "load_extra_bid", s.agents.load_extra_bid, where);
        s.agents.battery_bid = optional<double>(a, "battery_bid", s.agents.battery_bid, where);
        s.agents.vehicle_bid = optional<double>(a, "vehicle_bid", s.agents.vehicle_bid, where);
        s.agents.renewable_surplus_ask =
            optional<double>(a, "renewable_surplus_ask", s.agents.renewable_surplus_ask, where);
        s.agents.battery_ask = optional<double>(a, "battery_ask", s.agents.battery_ask, where);
    }

    const auto periods = s.grid.periods;
    for (const auto& r : required<json>(j, "resources", where)) {
        ResourceSpec spec;
        spec.name = required<std::string>(r, "name", where + " resource");
        const std::string ctx = "resource " + spec.name;
        spec.type = parse_resource_type(required<std::string>(r, "type", ctx));
        spec.grid_id = optional<std::string>(r, "grid_id", spec.name, ctx);
        spec.node = optional<std::string>(r, "node", "", ctx);
        spec.limit_weight = optional<double>(r, "limit_weight", is_load(spec.type) ? 0.0 : 1.0, ctx);
        spec.hosting_cap_kw = series(r, "hosting_cap_kw", periods, ctx);
        spec.capacity_kwh = optional<double>(r, "capacity_kwh", 0.0, ctx);
        spec.power_kw = optional<double>(r, "power_kw", 0.0, ctx);
        spec.peak_periods = period_list(r, "peak_periods", periods, ctx);
        spec.daily_kwh = optional<double>(r, "daily_kwh", 0.0, ctx);
        spec.baseline_kw = series(r, "baseline_kw", periods, ctx);
        spec.available_periods = period_list(r, "available_periods", periods, ctx);

        // Grid-backed resources take their node from the grid model.
        auto grid_node = [&](std::size_t idx) {
            const auto& id = s.grid.nodes[idx].id;
            if (!spec.node.empty() && spec.node != id) {
                throw Error(Errc::ConfigError, ctx + " is at " + spec.node + " but the grid places it at " + id);
            }
            spec.node = id;
        };
        auto find_id = [&](const auto& items, const char* what) -> std::size_t {
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (items[i].id == spec.grid_id) return i;
            }
            throw Error(Errc::ConfigError, ctx + " references unknown " + what + " '" + spec.grid_id + "'");
        };
        if (spec.type == ResourceType::Plant) grid_node(s.grid.plants[find_id(s.grid.plants, "plant")].node);
        if (is_load(spec.type)) grid_node(s.grid.loads[find_id(s.grid.loads, "load")].node);
        if (is_renewable(spec.type)) {
            grid_node(s.grid.renewables[find_id(s.grid.renewables, "renewable")].node);
        }
        if (spec.node.empty()) throw Error(Errc::ConfigError, ctx + ": missing 'node'");
        (void)s.grid.node_index(spec.node);
        s.resources.push_back(spec);
    }
    s.validate();
    return s;
}

void Scenario::validate() const {
    grid.validate();
    if (grid.periods != 12) {
        throw Error(Errc::ConfigError, "a scenario covers twelve periods, grid has " + std::to_string(grid.periods));
    }
    std::set<std::uint32_t> subnets;
    for (const auto& lan : topology.lans) {
        (void)grid.node_index(lan.node);
        if (!subnets.insert(lan.subnet).second) {
            throw Error(Errc::ConfigError, "subnet " + std::to_string(lan.subnet) + " is used twice");
        }
    }
    std::size_t isps = 0;
    std::set<std::string> names;
    for (const auto& r : resources) {
        if (!names.insert(r.name).second) throw Error(Errc::ConfigError, "duplicate resource " + r.name);
        const HostSpec* host = topology.host(r.name);
        if (!host) throw Error(Errc::ConfigError, "resource " + r.name + " has no host entry in the topology");
        const LanSpec* lan = topology.lan(host->lan);
        if (lan->node != r.node) {
            throw Error(Errc::ConfigError, "resource " + r.name + " is at node " + r.node + " but its host is on " +
                                               lan->name + " (node " + lan->node + ")");
        }
        if (r.type == ResourceType::Isp) ++isps;
        if (r.type == ResourceType::Battery && (r.capacity_kwh <= 0.0 || r.power_kw <= 0.0)) {
            throw Error(Errc::ConfigError, "battery " + r.name + " needs positive capacity_kwh and power_kw");
        }
        if (r.type == ResourceType::Vehicle) {
            if (r.power_kw <= 0.0 || r.daily_kwh < 0.0) {
                throw Error(Errc::ConfigError, "vehicle " + r.name + " needs positive power_kw");
            }
            if (r.baseline_kw.empty()) throw Error(Errc::ConfigError, "vehicle " + r.name + " needs baseline_kw");
            double sum = 0.0;
            for (double v : r.baseline_kw) sum += v * grid.period_hours;
            if (std::abs(sum - r.daily_kwh) > 1e-6 * (1.0 + r.daily_kwh)) {
                throw Error(Errc::ConfigError, "vehicle " + r.name + " baseline does not add up to daily_kwh");
            }
            if (r.available_periods.empty()) {
                throw Error(Errc::ConfigError, "vehicle " + r.name + " needs available_periods");
            }
            if (r.power_kw * grid.period_hours * static_cast<double>(r.available_periods.size()) < r.daily_kwh) {
                throw Error(Errc::ConfigError, "vehicle " + r.name + " cannot charge daily_kwh in its availability");
            }
        }
    }
    if (isps != 1) throw Error(Errc::ConfigError, "a scenario needs exactly one isp resource");
}

} // namespace ei
