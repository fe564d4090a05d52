#include "lsc/slice_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lsc/error.hpp"

namespace lsc {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> header_for(const VariantGrid& g, bool with_policy) {
    std::vector<std::string> h{"t"};
    for (int r = 0; r < g.d; ++r) h.push_back("z" + std::to_string(r + 1));
    for (int k : g.p_dates) h.push_back("p_" + std::to_string(k));
    if (g.has_m) h.push_back("m");
    h.push_back("w");
    if (with_policy) h.push_back("policy");
    return h;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& file, std::size_t row) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw CorruptedInput(file.string() + ": unparsable number '" + s + "' on row " + std::to_string(row));
    return v;
}

} // namespace

std::string slice_file_name(const ValueSlice& slice) {
    char t[32];
    std::snprintf(t, sizeof t, "%.6f", slice.t);
    const std::string stem = slice.variant.is_root() ? "root" : slice.variant.name();
    return stem + "_t" + t + "_i" + std::to_string(slice.variant.interval) + "_l" + std::to_string(slice.level) +
           ".csv";
}

void write_slice_csv(const ValueSlice& slice, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw InvalidArgument("cannot write " + file.string());
    const auto& g = slice.grid;
    const bool pol = !slice.policy.empty();
    const auto h = header_for(g, pol);
    for (std::size_t c = 0; c < h.size(); ++c) os << (c ? "," : "") << h[c];
    os << '\n';
    const std::string t = fmt17(slice.t);
    for (std::size_t k = 0; k < g.size; ++k) {
        const Vector x = g.coordinates(g.unflatten(k));
        os << t;
        for (int r = 0; r < x.size(); ++r) os << ',' << fmt17(x[r]);
        os << ',' << fmt17(slice.values[k]);
        if (pol) os << ',' << slice.policy[k];
        os << '\n';
    }
    if (!os) throw InvalidArgument("write failed for " + file.string());
}

ValueSlice read_slice_csv(const std::filesystem::path& file, const VariantKey& variant, const VariantGrid& grid,
                          int level) {
    std::ifstream is(file);
    if (!is) throw CorruptedInput("missing slice file " + file.string());
    std::string line;
    if (!std::getline(is, line)) throw CorruptedInput(file.string() + ": empty file");
    const auto head = split(line);
    bool with_policy = false;
    if (head == header_for(grid, true)) with_policy = true;
    else if (head != header_for(grid, false)) throw CorruptedInput(file.string() + ": header does not match the grid");

    ValueSlice s;
    s.variant = variant;
    s.level = level;
    s.grid = grid;
    s.values.resize(grid.size);
    if (with_policy) s.policy.resize(grid.size);
    const std::size_t cols = head.size();
    const int rank = grid.rank();
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (row >= grid.size) throw CorruptedInput(file.string() + ": too many rows");
        const auto cells = split(line);
        if (cells.size() != cols)
            throw CorruptedInput(file.string() + ": row " + std::to_string(row) + " has the wrong column count");
        const double t = parse_double(cells[0], file, row);
        if (row == 0) s.t = t;
        else if (t != s.t) throw CorruptedInput(file.string() + ": inconsistent time column");
        const Vector x = grid.coordinates(grid.unflatten(row));
        for (int r = 0; r < rank; ++r) {
            const double c = parse_double(cells[static_cast<std::size_t>(r + 1)], file, row);
            if (c != x[r]) throw CorruptedInput(file.string() + ": coordinates differ from the grid on row " +
                                                std::to_string(row));
        }
        s.values[row] = parse_double(cells[static_cast<std::size_t>(rank + 1)], file, row);
        if (with_policy) {
            const std::string& p = cells.back();
            std::int32_t v = 0;
            const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
            if (ec != std::errc() || ptr != p.data() + p.size())
                throw CorruptedInput(file.string() + ": bad policy entry on row " + std::to_string(row));
            s.policy[row] = v;
        }
        ++row;
    }
    if (row != grid.size)
        throw CorruptedInput(file.string() + ": expected " + std::to_string(grid.size) + " rows, found " +
                             std::to_string(row));
    return s;
}

std::vector<SliceFileEntry> write_slices(const SolveResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<SliceFileEntry> out;
    for (const auto& [id, s] : result.slices) {
        const std::string name = slice_file_name(s);
        write_slice_csv(s, dir / name);
        out.push_back({name, id.variant, id.level, s.t});
    }
    return out;
}

SolveResult result_skeleton(const ProblemSpec& spec, const GridSpec& grid, int interval_index) {
    grid.validate(spec.state_dim);
    SolveResult res;
    res.spec = spec;
    res.config = grid;
    res.start_interval = interval_index;
    res.schedule = make_schedule(spec.grid, grid.dt);
    res.controls.resize(res.schedule.size());
    for (std::size_t i = static_cast<std::size_t>(interval_index); i < res.schedule.size(); ++i)
        res.controls[i] = StepContext::make(res.spec, res.config, res.schedule[i].dt).controls;
    res.diagnostics.growth_constant = growth_constant(spec);
    return res;
}

SolveResult read_slices(const ProblemSpec& spec, const GridSpec& grid, int interval_index,
                        const std::filesystem::path& dir, const std::vector<SliceFileEntry>& entries) {
    SolveResult res = result_skeleton(spec, grid, interval_index);
    for (const auto& e : entries) {
        const VariantGrid g = VariantGrid::make(grid, e.variant, spec.state_dim);
        res.slices[SliceId{e.variant, e.level}] = read_slice_csv(dir / e.file, e.variant, g, e.level);
    }
    return res;
}

} // namespace lsc
