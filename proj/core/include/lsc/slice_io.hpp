#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lsc/solver.hpp"

namespace lsc {

/// One CSV file of a stored solve.
struct SliceFileEntry {
    std::string file;
    VariantKey variant;
    int level = 0;
    double t = 0.0;
};

/// `root_t<t>_i<interval>_l<level>.csv` for root variants, the variant name
/// in place of `root` otherwise.
std::string slice_file_name(const ValueSlice& slice);

/// Header `t,z1..zd,p_<date>...,m,w[,policy]`, one row per node in flat
/// order, every number with 17 significant digits.
void write_slice_csv(const ValueSlice& slice, const std::filesystem::path& file);

/// Reads a file written by write_slice_csv against the expected grid.
/// Throws CorruptedInput on header, coordinate, or row-count mismatches.
ValueSlice read_slice_csv(const std::filesystem::path& file, const VariantKey& variant, const VariantGrid& grid,
                          int level);

/// Writes every retained slice into `dir` and returns the file table.
std::vector<SliceFileEntry> write_slices(const SolveResult& result, const std::filesystem::path& dir);

/// SolveResult with schedule, control tables and growth constant filled in
/// and no slices.
SolveResult result_skeleton(const ProblemSpec& spec, const GridSpec& grid, int interval_index);

/// Rebuilds a SolveResult from stored slice files.
SolveResult read_slices(const ProblemSpec& spec, const GridSpec& grid, int interval_index,
                        const std::filesystem::path& dir, const std::vector<SliceFileEntry>& entries);

} // namespace lsc
