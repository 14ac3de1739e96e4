#pragma once

// Artifact formats.
//   CSV      header row, then values printed with 17 significant digits
//   binary   "SPCL1", uint32 block count, then per block uint64 rows, uint64 cols and
//            column-major little-endian doubles
//   config   `key = value` lines, `#` starts a comment

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "optimizer.hpp"

namespace sparsectl::io {

class IoError : public Error {
public:
    using Error::Error;
};

inline std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << std::setprecision(17);
    return os;
}

inline std::ifstream open_in(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return is;
}

inline std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

/// Parsed CSV: header names and numeric rows (method tags and other text cells kept separately).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] long column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<long>(i);
        }
        throw IoError("missing column " + name);
    }

    [[nodiscard]] Vector numeric(const std::string& name) const
    {
        const long c = column(name);
        Vector v(static_cast<long>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<long>(i)) = std::stod(rows[i].at(c));
        return v;
    }
};

inline CsvTable read_csv(const std::string& path)
{
    auto is = open_in(path);
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw IoError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line, ',');
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        t.rows.push_back(split(line, ','));
        if (t.rows.back().size() != t.header.size()) throw IoError(path + ": ragged row");
    }
    return t;
}

inline void write_spectrum_csv(const std::string& path, const Vector& lambda)
{
    auto os = open_out(path);
    os << "index,eigenvalue\n";
    for (long i = 0; i < lambda.size(); ++i) os << i + 1 << ',' << lambda(i) << '\n';
}

inline Vector read_spectrum_csv(const std::string& path) { return read_csv(path).numeric("eigenvalue"); }

/// One row per cell, row-major; i, j are 1-based cell indices in x and y.
inline void write_field_csv(const std::string& path, const Grid2D& grid, const Vector& values)
{
    detail::require_size(values.size(), grid.N, "write_field_csv");
    auto os = open_out(path);
    os << "i,j,x,y,value\n";
    for (int iy = 0; iy < grid.n; ++iy) {
        for (int ix = 0; ix < grid.n; ++ix) {
            os << ix + 1 << ',' << iy + 1 << ',' << grid.x(ix) << ',' << grid.y(iy) << ','
               << values(grid.index(ix, iy)) << '\n';
        }
    }
}

inline Vector read_field_csv(const std::string& path, const Grid2D& grid)
{
    const CsvTable t = read_csv(path);
    if (static_cast<long>(t.rows.size()) != grid.N) throw IoError(path + ": wrong number of cells");
    const long ci = t.column("i");
    const long cj = t.column("j");
    const long cv = t.column("value");
    Vector v(grid.N);
    for (const auto& row : t.rows) {
        const int ix = std::stoi(row[ci]) - 1;
        const int iy = std::stoi(row[cj]) - 1;
        if (ix < 0 || iy < 0 || ix >= grid.n || iy >= grid.n) throw IoError(path + ": cell index out of range");
        v(grid.index(ix, iy)) = std::stod(row[cv]);
    }
    return v;
}

inline void write_convergence_csv(const std::string& path, const ConvergenceRecord& rec)
{
    auto os = open_out(path);
    os << "iter,method,epsilon,grad_norm,objective,cost_units,n_cg\n";
    for (const auto& r : rec.rows) {
        os << r.iter << ',' << r.method << ',' << r.eps << ',' << r.grad_norm << ',' << r.objective << ','
           << r.cost_units << ',' << r.n_cg << '\n';
    }
}

inline ConvergenceRecord read_convergence_csv(const std::string& path)
{
    const CsvTable t = read_csv(path);
    const long c_iter = t.column("iter"), c_m = t.column("method"), c_e = t.column("epsilon"),
               c_g = t.column("grad_norm"), c_o = t.column("objective"), c_c = t.column("cost_units"),
               c_n = t.column("n_cg");
    ConvergenceRecord rec;
    for (const auto& row : t.rows) {
        IterationRow r;
        r.iter = std::stoi(row[c_iter]);
        r.method = row[c_m];
        r.eps = std::stod(row[c_e]);
        r.grad_norm = std::stod(row[c_g]);
        r.objective = std::stod(row[c_o]);
        r.cost_units = std::stod(row[c_c]);
        r.n_cg = std::stoi(row[c_n]);
        rec.rows.push_back(r);
    }
    return rec;
}

/// One draw per row, comma separated, no header.
inline std::vector<Vector> read_rows_csv(const std::string& path, long width)
{
    auto is = open_in(path);
    std::vector<Vector> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (static_cast<long>(cells.size()) != width) throw IoError(path + ": row has wrong length");
        Vector v(width);
        for (long j = 0; j < width; ++j) v(j) = std::stod(cells[static_cast<std::size_t>(j)]);
        out.push_back(std::move(v));
    }
    return out;
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary artifacts assume a little-endian host");

inline constexpr char magic[5] = {'S', 'P', 'C', 'L', '1'};

template <class T>
void put(std::ostream& os, T v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("truncated binary artifact");
    return v;
}

} // namespace detail

inline void write_blocks(const std::string& path, const std::vector<Matrix>& blocks)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(detail::magic, sizeof(detail::magic));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(blocks.size()));
    for (const Matrix& m : blocks) {
        detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
        detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
        os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    if (!os) throw IoError("write failed: " + path);
}

inline std::vector<Matrix> read_blocks(const std::string& path)
{
    auto is = open_in(path);
    char head[sizeof(detail::magic)];
    is.read(head, sizeof(head));
    if (!is || std::memcmp(head, detail::magic, sizeof(head)) != 0) throw IoError(path + ": bad magic");
    const auto count = detail::get<std::uint32_t>(is);
    std::vector<Matrix> blocks;
    for (std::uint32_t b = 0; b < count; ++b) {
        const auto rows = detail::get<std::uint64_t>(is);
        const auto cols = detail::get<std::uint64_t>(is);
        if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw IoError(path + ": implausible block size");
        Matrix m(static_cast<long>(rows), static_cast<long>(cols));
        is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!is) throw IoError(path + ": truncated block");
        blocks.push_back(std::move(m));
    }
    return blocks;
}

inline Matrix column(const Vector& v) { return Matrix(v); }
inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline void write_lowrank(const std::string& path, const LowRankSym& lr)
{
    write_blocks(path, {lr.U, column(lr.lambda), scalar(lr.residual), scalar(static_cast<double>(lr.products)),
                        scalar(lr.rank_deficient ? 1.0 : 0.0)});
}

inline LowRankSym read_lowrank(const std::string& path)
{
    const auto b = read_blocks(path);
    if (b.size() != 5) throw IoError(path + ": not a low-rank artifact");
    LowRankSym lr;
    lr.U = b[0];
    lr.lambda = b[1].col(0);
    lr.residual = b[2](0, 0);
    lr.products = static_cast<long>(b[3](0, 0));
    lr.rank_deficient = b[4](0, 0) != 0.0;
    if (lr.U.cols() != lr.lambda.size()) throw IoError(path + ": inconsistent factors");
    return lr;
}

inline void write_basis(const std::string& path, const ForcingBasis& fb)
{
    write_blocks(path, {column(fb.e0), fb.E, fb.F, fb.G, column(fb.c0), column(fb.singular_values),
                        scalar(fb.truncated ? 1.0 : 0.0)});
}

inline ForcingBasis read_basis(const std::string& path)
{
    const auto b = read_blocks(path);
    if (b.size() != 7) throw IoError(path + ": not a forcing-basis artifact");
    ForcingBasis fb;
    fb.e0 = b[0].col(0);
    fb.E = b[1];
    fb.F = b[2];
    fb.G = b[3];
    fb.c0 = b[4].col(0);
    fb.singular_values = b[5].cols() ? Vector(b[5].col(0)) : Vector();
    fb.truncated = b[6](0, 0) != 0.0;
    return fb;
}

/// nu, eps, converged flag, grad norm, u_mean, modes, second moment.
inline void write_result(const std::string& path, const SolveResult& r)
{
    write_blocks(path, {column(r.nu.nu), scalar(r.nu.eps), scalar(r.converged ? 1.0 : 0.0), scalar(r.grad_norm),
                        column(r.u_mean), r.modes, column(r.second_moment)});
}

inline SolveResult read_result(const std::string& path)
{
    const auto b = read_blocks(path);
    if (b.size() != 7) throw IoError(path + ": not a result artifact");
    SolveResult r;
    r.nu = WeightField(b[0].col(0), b[1](0, 0));
    r.converged = b[2](0, 0) != 0.0;
    r.grad_norm = b[3](0, 0);
    r.u_mean = b[4].col(0);
    r.modes = b[5];
    r.second_moment = b[6].col(0);
    return r;
}

/// Flat `key = value` file; later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline KeyValues parse_config(std::istream& is, const std::string& name = "config")
{
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError(name + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw IoError(name + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline KeyValues read_config(const std::string& path)
{
    auto is = open_in(path);
    return parse_config(is, path);
}

inline void write_config(std::ostream& os, const KeyValues& kv)
{
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

} // namespace sparsectl::io
