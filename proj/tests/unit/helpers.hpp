#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "lsc/grid.hpp"
#include "lsc/model.hpp"

namespace lsc::test {

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

inline double pos(double x) { return x > 0.0 ? x : 0.0; }

/// dZ = mu dt + sigma dW with constant coefficients, f = Psi = max(z, 0) and
/// the single control 0.
inline ProblemSpec constant_spec(double mu, double sigma, std::vector<double> dates) {
    ProblemSpec s;
    s.name = "constant";
    s.state_dim = 1;
    s.sde.drift = [mu](double, const Vector&, const Vector&) { return vec({mu}); };
    s.sde.diffusion = [sigma](double, const Vector&, const Vector&) { return Matrix(Matrix::Constant(1, 1, sigma)); };
    s.sde.lipschitz_z = 0.0;
    s.sde.growth_z = std::max(std::abs(mu), std::abs(sigma));
    s.loss.terminal_cost = [](const Vector& z) { return pos(z[0]); };
    s.loss.loss = [](const Vector& z) { return pos(z[0]); };
    s.loss.lipschitz_f = 1.0;
    s.loss.lipschitz_psi = 1.0;
    s.grid.dates = std::move(dates);
    s.controls = ControlSet::finite({vec({0.0})});
    s.domain = StateBox{vec({-1.0}), vec({3.0})};
    return s;
}

inline GridSpec grid_1d(double zlo, double zhi, int nz, double pmax, int np, double mmax, int nm, double dt,
                        double a_max) {
    GridSpec g;
    g.z_axes = {UniformAxis{zlo, zhi, nz}};
    g.p_axis = UniformAxis{0.0, pmax, np};
    g.m_axis = UniformAxis{0.0, mmax, nm};
    g.dt = dt;
    g.a_max = a_max;
    return g;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("lsc_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

} // namespace lsc::test
