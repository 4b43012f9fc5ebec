/* config.hpp */

#ifndef GRIDSLAM_CONFIG_HPP
#define GRIDSLAM_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridslam/algorithms.hpp"
#include "gridslam/errors.hpp"
#include "gridslam/io.hpp"
#include "gridslam/simulator.hpp"

namespace gridslam {

/*
 * Flat key=value text. Blank lines and lines starting with '#' are
 * ignored; whitespace around keys and values is trimmed.
 */
struct KeyValue
{
    std::string value;
    std::size_t line = 0;
};

using KeyValues = std::map<std::string, KeyValue, std::less<>>;

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto ws = [](char c) { return c == ' ' || c == '\t'; };
    while (!s.empty() && ws(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && ws(s.back()))
        s.remove_suffix(1);
    return s;
}

} // namespace detail

inline KeyValues parse_key_values(std::string_view text)
{
    KeyValues kv;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        ++lineno;
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos)
            nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        start = nl + 1;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        line = detail::trim(line);
        if (line.empty() || line.front() == '#')
            continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(lineno, "expected key=value");
        const std::string_view key = detail::trim(line.substr(0, eq));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(lineno, "empty key");
        if (value.empty())
            throw ParseError(lineno, "empty value for '" + std::string(key) + "'");
        if (!kv.emplace(std::string(key), KeyValue { std::string(value), lineno }).second)
            throw ParseError(lineno, "duplicate key '" + std::string(key) + "'");
    }
    return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path)
{
    return parse_key_values(detail::read_file(path));
}

/* One settable, printable configuration entry */
struct ConfigField
{
    std::string key;
    std::function<void(std::string_view, std::size_t)> set;
    std::function<std::string()> get;
};

namespace detail {

inline ConfigField real_entry(std::string key, double& ref)
{
    return { key,
             [&ref, key](std::string_view v, std::size_t line) {
                 ref = real_field(v, line, key); },
             [&ref] { return format_real(ref); } };
}

inline ConfigField int_entry(std::string key, int& ref)
{
    return { key,
             [&ref, key](std::string_view v, std::size_t line) {
                 const long long x = int_field(v, line, key);
                 if (x < -2147483647LL || x > 2147483647LL)
                     throw ParseError(line, key + " out of range");
                 ref = static_cast<int>(x); },
             [&ref] { return std::to_string(ref); } };
}

inline ConfigField seed_entry(std::string key, std::uint64_t& ref)
{
    return { key,
             [&ref, key](std::string_view v, std::size_t line) {
                 auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), ref);
                 if (ec != std::errc() || ptr != v.data() + v.size())
                     throw ParseError(line, "bad " + key + " '" + std::string(v) + "'"); },
             [&ref] { return std::to_string(ref); } };
}

inline void pose_entries(std::vector<ConfigField>& out, const std::string& prefix, Pose& p)
{
    out.push_back(real_entry(prefix + ".x", p.x));
    out.push_back(real_entry(prefix + ".y", p.y));
    out.push_back(real_entry(prefix + ".heading", p.heading));
}

inline void motion_entries(std::vector<ConfigField>& out, const std::string& prefix,
                           MotionParams& m)
{
    out.push_back(real_entry(prefix + ".rot_std_base", m.rot_std_base));
    out.push_back(real_entry(prefix + ".rot_std_per_rad", m.rot_std_per_rad));
    out.push_back(real_entry(prefix + ".trans_std_base", m.trans_std_base));
    out.push_back(real_entry(prefix + ".trans_std_per_meter", m.trans_std_per_meter));
}

/* Waypoints as "x,y x,y ..." */
inline ConfigField waypoint_entry(std::vector<Waypoint>& ref)
{
    return { "waypoints",
             [&ref](std::string_view v, std::size_t line) {
                 ref.clear();
                 std::size_t pos = 0;
                 while (pos < v.size()) {
                     while (pos < v.size() && v[pos] == ' ')
                         ++pos;
                     if (pos >= v.size())
                         break;
                     std::size_t end = v.find(' ', pos);
                     if (end == std::string_view::npos)
                         end = v.size();
                     const std::string_view pair = v.substr(pos, end - pos);
                     const std::size_t comma = pair.find(',');
                     if (comma == std::string_view::npos)
                         throw ParseError(line, "waypoint '" + std::string(pair) + "' is not x,y");
                     ref.push_back(Waypoint { real_field(pair.substr(0, comma), line, "waypoint x"),
                                              real_field(pair.substr(comma + 1), line, "waypoint y") });
                     pos = end;
                 }
             },
             [&ref] {
                 std::string s;
                 for (const Waypoint& w : ref) {
                     if (!s.empty())
                         s += ' ';
                     s += format_real(w.x) + "," + format_real(w.y);
                 }
                 return s;
             } };
}

inline void apply_fields(const std::vector<ConfigField>& fields, const KeyValues& kv)
{
    for (const auto& [key, entry] : kv) {
        bool found = false;
        for (const ConfigField& f : fields)
            if (f.key == key) {
                f.set(entry.value, entry.line);
                found = true;
                break;
            }
        if (!found)
            throw ParseError(entry.line, "unknown key '" + key + "'");
    }
}

inline std::string format_fields(const std::vector<ConfigField>& fields)
{
    std::string out;
    for (const ConfigField& f : fields)
        out += f.key + " = " + f.get() + "\n";
    return out;
}

} // namespace detail

inline std::vector<ConfigField> slam_config_fields(SlamConfig& c)
{
    using namespace detail;
    std::vector<ConfigField> f;
    f.push_back(int_entry("n_is", c.n_is));
    f.push_back(seed_entry("seed", c.seed));
    f.push_back(int_entry("workers", c.workers));
    motion_entries(f, "motion", c.motion);
    f.push_back(real_entry("perception.sigma", c.perception.sigma));
    f.push_back(real_entry("perception.d_max", c.perception.d_max));
    f.push_back(real_entry("prior.p", c.prior.p));
    f.push_back(real_entry("labeling.pi", c.labeling.pi));
    f.push_back(int_entry("grid.rows", c.geometry.rows));
    f.push_back(int_entry("grid.cols", c.geometry.cols));
    f.push_back(real_entry("grid.resolution", c.geometry.resolution));
    f.push_back(real_entry("grid.origin_x", c.geometry.origin_x));
    f.push_back(real_entry("grid.origin_y", c.geometry.origin_y));
    pose_entries(f, "start", c.start);
    f.push_back(real_entry("redundancy.min_trans", c.redundancy.min_trans));
    f.push_back(real_entry("redundancy.min_rot", c.redundancy.min_rot));
    return f;
}

/* Simulator settings plus the scanner the log is recorded with */
struct SimulationSetup
{
    SimConfig sim;
    int n_beams = 180;
    double d_max = 10.0;

    PerceptionParams scanner() const { return PerceptionParams { this->sim.laser_sigma, this->d_max }; }
};

inline std::vector<ConfigField> sim_config_fields(SimulationSetup& s)
{
    using namespace detail;
    SimConfig& c = s.sim;
    std::vector<ConfigField> f;
    f.push_back(seed_entry("seed", c.seed));
    pose_entries(f, "start", c.start);
    f.push_back(waypoint_entry(c.waypoints));
    f.push_back(real_entry("step_trans", c.step_trans));
    f.push_back(real_entry("step_rot_cap", c.step_rot_cap));
    motion_entries(f, "odo_noise", c.odo_noise);
    f.push_back(real_entry("rot_bias", c.rot_bias));
    f.push_back(real_entry("laser_sigma", c.laser_sigma));
    f.push_back(real_entry("rate_hint", c.rate_hint));
    f.push_back(int_entry("n_beams", s.n_beams));
    f.push_back(real_entry("d_max", s.d_max));
    return f;
}

/* Overrides the given defaults with the keys present */
inline void apply_slam_config(SlamConfig& c, const KeyValues& kv)
{
    detail::apply_fields(slam_config_fields(c), kv);
}

inline void apply_sim_config(SimulationSetup& s, const KeyValues& kv)
{
    detail::apply_fields(sim_config_fields(s), kv);
}

inline std::string format_slam_config(SlamConfig c)
{
    return detail::format_fields(slam_config_fields(c));
}

inline std::string format_sim_config(SimulationSetup s)
{
    return detail::format_fields(sim_config_fields(s));
}

/* Ordered (key, value) pairs, for echoing into manifests */
inline std::vector<std::pair<std::string, std::string>> slam_config_entries(SlamConfig c)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const ConfigField& f : slam_config_fields(c))
        out.emplace_back(f.key, f.get());
    return out;
}

inline std::vector<std::pair<std::string, std::string>> sim_config_entries(SimulationSetup s)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const ConfigField& f : sim_config_fields(s))
        out.emplace_back(f.key, f.get());
    return out;
}

} // namespace gridslam

#endif // GRIDSLAM_CONFIG_HPP
