/* io.hpp */

#ifndef GRIDSLAM_IO_HPP
#define GRIDSLAM_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gridslam/dataset.hpp"
#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/mapping.hpp"
#include "gridslam/simulator.hpp"

namespace gridslam {

/*
 * Number formatting: 9 significant digits with trailing zeros kept,
 * fixed notation for exponents in [-5, 9) and scientific otherwise.
 * Built on to_chars so the output never depends on the locale.
 */
inline std::string format_real(double v)
{
    if (!std::isfinite(v))
        throw InvalidArgument("cannot serialize a non-finite number");

    constexpr int kDigits = 9;
    char buf[64];
    auto sci = std::to_chars(buf, buf + sizeof(buf), v,
                             std::chars_format::scientific, kDigits - 1);
    const std::string_view s(buf, static_cast<std::size_t>(sci.ptr - buf));
    const std::size_t e = s.find('e');
    int exponent = 0;
    std::from_chars(s.data() + e + 1 + (s[e + 1] == '+' ? 1 : 0),
                    s.data() + s.size(), exponent);

    if (exponent < -4 || exponent >= kDigits)
        return std::string(s);

    auto fx = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed,
                            kDigits - 1 - exponent);
    std::string out(buf, fx.ptr);
    if (out.find('.') == std::string::npos)
        out += '.';
    return out;
}

namespace detail {

inline bool parse_real(std::string_view tok, double& out)
{
    if (tok.empty())
        return false;
    const char* first = tok.data();
    if (*first == '+')
        return false;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view tok, long long& out)
{
    if (tok.empty())
        return false;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline double real_field(std::string_view tok, std::size_t line, std::string_view what)
{
    double v = 0.0;
    if (!parse_real(tok, v))
        throw ParseError(line, "bad " + std::string(what) + " '" + std::string(tok) + "'");
    return v;
}

inline long long int_field(std::string_view tok, std::size_t line, std::string_view what)
{
    long long v = 0;
    if (!parse_int(tok, v))
        throw ParseError(line, "bad " + std::string(what) + " '" + std::string(tok) + "'");
    return v;
}

/* Single spaces between tokens; anything else is a parse error */
inline std::vector<std::string_view> split(std::string_view line, char sep,
                                           std::size_t lineno)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        const std::string_view tok = line.substr(start, pos == std::string_view::npos
                                                            ? std::string_view::npos
                                                            : pos - start);
        if (tok.empty())
            throw ParseError(lineno, "empty field");
        out.push_back(tok);
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

/*
 * Splits text into lines. A final newline is required for non-empty
 * text and nothing may follow it.
 */
inline std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    if (text.empty())
        throw ParseError(1, "empty input");
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos)
            throw ParseError(lines.size() + 1, "missing final newline");
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r')
            throw ParseError(lines.size() + 1, "carriage return in line");
        lines.push_back(line);
        start = nl + 1;
    }
    return lines;
}

/* key=value header field */
inline std::string_view header_value(std::string_view tok, std::string_view key,
                                     std::size_t line)
{
    if (tok.size() <= key.size() + 1 || tok.substr(0, key.size()) != key ||
        tok[key.size()] != '=')
        throw ParseError(line, "expected " + std::string(key) + "=<value>");
    return tok.substr(key.size() + 1);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IOError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw IOError("cannot read " + path.string());
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IOError("cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out)
        throw IOError("cannot write " + path.string());
}

} // namespace detail

/*
 * Datasets
 */

inline std::string format_dataset(const Dataset& d)
{
    d.validate();
    std::string out = "GRIDSLAM-LOG v1 n_beams=" + std::to_string(d.n_beams) +
                      " d_max=" + format_real(d.d_max) +
                      " resolution=" + format_real(d.resolution) + "\n";
    for (std::size_t t = 0; t < d.records.size(); ++t) {
        const DataRecord& r = d.records[t];
        out += std::to_string(t + 1);
        out += ' ';
        out += format_real(r.u.rot);
        out += ' ';
        out += format_real(r.u.trans);
        for (const double v : r.ranges) {
            out += ' ';
            out += format_real(v);
        }
        out += '\n';
    }
    return out;
}

inline Dataset parse_dataset(std::string_view text)
{
    const auto lines = detail::split_lines(text);
    const auto head = detail::split(lines[0], ' ', 1);
    if (head.size() != 5 || head[0] != "GRIDSLAM-LOG" || head[1] != "v1")
        throw ParseError(1, "expected 'GRIDSLAM-LOG v1 n_beams=<N> d_max=<m> resolution=<m>'");

    Dataset d;
    const long long n = detail::int_field(detail::header_value(head[2], "n_beams", 1), 1, "n_beams");
    if (n < 1 || n > 100000)
        throw ParseError(1, "n_beams out of range");
    d.n_beams = static_cast<int>(n);
    d.d_max = detail::real_field(detail::header_value(head[3], "d_max", 1), 1, "d_max");
    d.resolution = detail::real_field(detail::header_value(head[4], "resolution", 1), 1, "resolution");
    if (!(d.d_max > 0.0) || !(d.resolution > 0.0))
        throw ParseError(1, "d_max and resolution must be positive");

    const std::size_t fields = 3 + static_cast<std::size_t>(d.n_beams);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        const auto tok = detail::split(lines[i], ' ', lineno);
        if (tok.size() != fields)
            throw SchemaError(lineno, "expected " + std::to_string(fields) +
                                          " fields, found " + std::to_string(tok.size()));
        if (detail::int_field(tok[0], lineno, "timestep") != static_cast<long long>(i))
            throw ParseError(lineno, "timesteps must run 1, 2, 3, ...");
        DataRecord r;
        r.u.rot = detail::real_field(tok[1], lineno, "rotation");
        r.u.trans = detail::real_field(tok[2], lineno, "translation");
        r.ranges.resize(static_cast<std::size_t>(d.n_beams));
        for (std::size_t k = 0; k < r.ranges.size(); ++k) {
            r.ranges[k] = detail::real_field(tok[3 + k], lineno, "reading");
            if (!(r.ranges[k] > 0.0) || r.ranges[k] > d.d_max)
                throw ParseError(lineno, "reading outside (0, d_max]");
        }
        d.records.push_back(std::move(r));
    }
    return d;
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& path)
{
    detail::write_file(path, format_dataset(d));
}

inline Dataset read_dataset(const std::filesystem::path& path)
{
    return parse_dataset(detail::read_file(path));
}

/*
 * Worlds: the first text row is the top of the map (highest row index)
 */

inline std::string format_world(const World& w)
{
    w.geometry.validate();
    if (w.geometry.origin_x != 0.0 || w.geometry.origin_y != 0.0)
        throw InvalidArgument("world files store worlds anchored at the origin");
    std::string out = "GRIDSLAM-WORLD v1 rows=" + std::to_string(w.geometry.rows) +
                      " cols=" + std::to_string(w.geometry.cols) +
                      " resolution=" + format_real(w.geometry.resolution) + "\n";
    for (int r = w.geometry.rows - 1; r >= 0; --r) {
        for (int c = 0; c < w.geometry.cols; ++c)
            out += w.walls(r, c) ? '#' : '.';
        out += '\n';
    }
    return out;
}

inline World parse_world(std::string_view text)
{
    const auto lines = detail::split_lines(text);
    const auto head = detail::split(lines[0], ' ', 1);
    if (head.size() != 5 || head[0] != "GRIDSLAM-WORLD" || head[1] != "v1")
        throw ParseError(1, "expected 'GRIDSLAM-WORLD v1 rows=<R> cols=<C> resolution=<m>'");
    const long long rows = detail::int_field(detail::header_value(head[2], "rows", 1), 1, "rows");
    const long long cols = detail::int_field(detail::header_value(head[3], "cols", 1), 1, "cols");
    const double res = detail::real_field(detail::header_value(head[4], "resolution", 1), 1, "resolution");
    if (rows < 1 || cols < 1 || rows > 100000 || cols > 100000)
        throw ParseError(1, "grid dimensions out of range");
    if (!(res > 0.0))
        throw ParseError(1, "resolution must be positive");
    if (lines.size() - 1 != static_cast<std::size_t>(rows))
        throw ParseError(lines.size() < static_cast<std::size_t>(rows) + 1 ? lines.size() + 1
                                                                        : static_cast<std::size_t>(rows) + 2,
                         "expected " + std::to_string(rows) + " map rows");

    World w(GridGeometry { static_cast<int>(rows), static_cast<int>(cols), res, 0.0, 0.0 });
    for (long long i = 0; i < rows; ++i) {
        const std::size_t lineno = static_cast<std::size_t>(i) + 2;
        const std::string_view line = lines[static_cast<std::size_t>(i) + 1];
        if (line.size() != static_cast<std::size_t>(cols))
            throw RaggedRows(lineno, "row has " + std::to_string(line.size()) +
                                         " cells, expected " + std::to_string(cols));
        const int r = static_cast<int>(rows - 1 - i);
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (line[c] == '#')
                w.walls(r, static_cast<int>(c)) = 1;
            else if (line[c] == '.')
                w.walls(r, static_cast<int>(c)) = 0;
            else
                throw ParseError(lineno, std::string("unexpected character '") + line[c] + "'");
        }
    }
    return w;
}

inline void write_world(const World& w, const std::filesystem::path& path)
{
    detail::write_file(path, format_world(w));
}

inline World read_world(const std::filesystem::path& path)
{
    return parse_world(detail::read_file(path));
}

/*
 * Binary PGM maps, top row first
 */

inline std::string format_pgm(const Grid<std::uint8_t>& image)
{
    std::string out = "P5\n" + std::to_string(image.cols()) + " " +
                      std::to_string(image.rows()) + "\n255\n";
    out.reserve(out.size() + image.size());
    for (int r = image.rows() - 1; r >= 0; --r)
        for (int c = 0; c < image.cols(); ++c)
            out += static_cast<char>(image(r, c));
    return out;
}

inline Grid<std::uint8_t> parse_pgm(std::string_view data)
{
    /* Only the exact layout written above is accepted */
    std::size_t pos = 0;
    auto line = [&](std::size_t lineno) {
        const std::size_t nl = data.find('\n', pos);
        if (nl == std::string_view::npos)
            throw ParseError(lineno, "truncated PGM header");
        const std::string_view s = data.substr(pos, nl - pos);
        pos = nl + 1;
        return s;
    };
    if (line(1) != "P5")
        throw ParseError(1, "expected P5");
    const auto dims = detail::split(line(2), ' ', 2);
    if (dims.size() != 2)
        throw ParseError(2, "expected '<cols> <rows>'");
    const long long cols = detail::int_field(dims[0], 2, "width");
    const long long rows = detail::int_field(dims[1], 2, "height");
    if (rows < 1 || cols < 1 || rows > 100000 || cols > 100000)
        throw ParseError(2, "image dimensions out of range");
    if (line(3) != "255")
        throw ParseError(3, "expected maxval 255");
    const std::size_t need = static_cast<std::size_t>(rows * cols);
    if (data.size() - pos != need)
        throw ParseError(4, "pixel data has " + std::to_string(data.size() - pos) +
                                " bytes, expected " + std::to_string(need));

    Grid<std::uint8_t> image(static_cast<int>(rows), static_cast<int>(cols));
    for (int r = image.rows() - 1; r >= 0; --r)
        for (int c = 0; c < image.cols(); ++c)
            image(r, c) = static_cast<std::uint8_t>(data[pos++]);
    return image;
}

inline void write_map_pgm(const Grid<std::uint8_t>& image,
                          const std::filesystem::path& path)
{
    detail::write_file(path, format_pgm(image));
}

inline Grid<std::uint8_t> read_map_pgm(const std::filesystem::path& path)
{
    return parse_pgm(detail::read_file(path));
}

/* Inverse of the rendering table; other pixel values are rejected */
inline Grid<CellLabel> labels_from_pixels(const Grid<std::uint8_t>& image)
{
    Grid<CellLabel> labels(image.rows(), image.cols());
    for (std::size_t i = 0; i < image.size(); ++i) {
        switch (image.values()[i]) {
            case 0: labels.values()[i] = CellLabel::Occupied; break;
            case 255: labels.values()[i] = CellLabel::Empty; break;
            case 127: labels.values()[i] = CellLabel::Unknown; break;
            default:
                throw InvalidArgument("pixel value " + std::to_string(image.values()[i]) +
                                      " is not a map label");
        }
    }
    return labels;
}

/*
 * Paths as CSV with the originating timestep of every pose
 */

struct TimedPath
{
    std::vector<int> timesteps;
    std::vector<Pose> poses;

    friend bool operator==(const TimedPath&, const TimedPath&) = default;
};

inline std::string format_path_csv(const TimedPath& p)
{
    if (p.timesteps.size() != p.poses.size())
        throw LengthMismatch("timesteps and poses differ in length");
    std::string out = "t,x,y,heading\n";
    for (std::size_t i = 0; i < p.poses.size(); ++i) {
        out += std::to_string(p.timesteps[i]);
        out += ',';
        out += format_real(p.poses[i].x);
        out += ',';
        out += format_real(p.poses[i].y);
        out += ',';
        out += format_real(p.poses[i].heading);
        out += '\n';
    }
    return out;
}

inline TimedPath parse_path_csv(std::string_view text)
{
    const auto lines = detail::split_lines(text);
    if (lines[0] != "t,x,y,heading")
        throw ParseError(1, "expected header 't,x,y,heading'");
    TimedPath p;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        const auto tok = detail::split(lines[i], ',', lineno);
        if (tok.size() != 4)
            throw ParseError(lineno, "expected 4 fields");
        const long long t = detail::int_field(tok[0], lineno, "timestep");
        if (t < 0 || t > 1000000000LL || (!p.timesteps.empty() && t <= p.timesteps.back()))
            throw ParseError(lineno, "timesteps must be non-negative and increasing");
        p.timesteps.push_back(static_cast<int>(t));
        p.poses.push_back(Pose { detail::real_field(tok[1], lineno, "x"),
                                 detail::real_field(tok[2], lineno, "y"),
                                 detail::real_field(tok[3], lineno, "heading") });
    }
    return p;
}

inline void write_path_csv(const TimedPath& p, const std::filesystem::path& path)
{
    detail::write_file(path, format_path_csv(p));
}

inline TimedPath read_path_csv(const std::filesystem::path& path)
{
    return parse_path_csv(detail::read_file(path));
}

/* Consecutive timesteps 0..n-1, the layout of simulator ground truth */
inline TimedPath timed_path(std::span<const Pose> poses)
{
    TimedPath p;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        p.timesteps.push_back(static_cast<int>(i));
        p.poses.push_back(poses[i]);
    }
    return p;
}

} // namespace gridslam

#endif // GRIDSLAM_IO_HPP
