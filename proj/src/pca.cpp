#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "clares/data.hpp"
#include "clares/error.hpp"

namespace clares {

PcaModel fit_pca(const HsiCube& cube, std::size_t n_components,
                 const std::vector<PixelCoord>* coords) {
    const std::size_t b = cube.bands;
    if (n_components == 0 || n_components > b)
        throw ArgumentError("fit_pca: n_components must be in [1, bands]");
    if (cube.pixels() == 0) throw DimensionError("fit_pca: empty cube");

    std::vector<std::size_t> pix;
    if (coords != nullptr) {
        if (coords->empty()) throw ArgumentError("fit_pca: empty fit population");
        pix.reserve(coords->size());
        for (const auto& [r, c] : *coords) pix.push_back(r * cube.cols + c);
    } else {
        pix.resize(cube.pixels());
        for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = i;
    }
    const double n = static_cast<double>(pix.size());

    PcaModel model;
    model.bands = b;
    model.components = n_components;
    model.band_means.assign(b, 0.0);
    model.band_stds.assign(b, 0.0);
    for (std::size_t p : pix)
        for (std::size_t k = 0; k < b; ++k)
            model.band_means[k] += static_cast<double>(cube.data[p * b + k]);
    for (auto& m : model.band_means) m /= n;
    for (std::size_t p : pix)
        for (std::size_t k = 0; k < b; ++k) {
            const double d = static_cast<double>(cube.data[p * b + k]) - model.band_means[k];
            model.band_stds[k] += d * d;
        }
    for (auto& s : model.band_stds) s = std::max(std::sqrt(s / n), 1e-8);

    // correlation matrix of the standardized bands, accumulated in blocks
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b),
                                                static_cast<Eigen::Index>(b));
    constexpr std::size_t kBlock = 2048;
    Eigen::MatrixXd z(kBlock, static_cast<Eigen::Index>(b));
    std::size_t filled = 0;
    auto flush = [&]() {
        if (filled == 0) return;
        cov.noalias() += z.topRows(static_cast<Eigen::Index>(filled)).transpose() *
                         z.topRows(static_cast<Eigen::Index>(filled));
        filled = 0;
    };
    for (std::size_t p : pix) {
        for (std::size_t k = 0; k < b; ++k)
            z(static_cast<Eigen::Index>(filled), static_cast<Eigen::Index>(k)) =
                (static_cast<double>(cube.data[p * b + k]) - model.band_means[k]) /
                model.band_stds[k];
        if (++filled == kBlock) flush();
    }
    flush();
    cov /= n;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw NumericError("fit_pca: eigendecomposition did not converge");

    // eigenvalues come back ascending; take the top n_components
    model.comps.assign(b * n_components, 0.0);
    model.explained_variance.assign(n_components, 0.0);
    for (std::size_t t = 0; t < n_components; ++t) {
        const auto src = static_cast<Eigen::Index>(b - 1 - t);
        model.explained_variance[t] = std::max(solver.eigenvalues()(src), 0.0);
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        // deterministic sign: the largest-magnitude entry (lowest index on
        // ties) is made positive
        Eigen::Index arg = 0;
        double best = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (std::abs(v(i)) > best) {
                best = std::abs(v(i));
                arg = i;
            }
        if (v(arg) < 0.0) v = -v;
        for (std::size_t k = 0; k < b; ++k)
            model.comps[k * n_components + t] = v(static_cast<Eigen::Index>(k));
    }
    return model;
}

HsiCube apply_pca(const HsiCube& cube, const PcaModel& model) {
    if (cube.bands != model.bands)
        throw DimensionError("apply_pca: cube has " + std::to_string(cube.bands) +
                             " bands, model expects " + std::to_string(model.bands));
    const std::size_t b = model.bands, t = model.components, n = cube.pixels();
    HsiCube out;
    out.rows = cube.rows;
    out.cols = cube.cols;
    out.bands = t;
    out.data.resize(n * t);
    std::vector<double> z(b);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t k = 0; k < b; ++k)
            z[k] = (static_cast<double>(cube.data[p * b + k]) - model.band_means[k]) /
                   model.band_stds[k];
        for (std::size_t j = 0; j < t; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < b; ++k) acc += z[k] * model.comps[k * t + j];
            out.data[p * t + j] = static_cast<float>(acc);
        }
    }
    return out;
}

void save_pca_json(const std::string& path, const PcaModel& model) {
    nlohmann::json j;
    j["bands"] = model.bands;
    j["components"] = model.components;
    j["band_means"] = model.band_means;
    j["band_stds"] = model.band_stds;
    j["comps"] = model.comps;
    j["explained_variance"] = model.explained_variance;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump() << "\n";
}

PcaModel load_pca_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        PcaModel m;
        m.bands = j.at("bands").get<std::size_t>();
        m.components = j.at("components").get<std::size_t>();
        m.band_means = j.at("band_means").get<std::vector<double>>();
        m.band_stds = j.at("band_stds").get<std::vector<double>>();
        m.comps = j.at("comps").get<std::vector<double>>();
        m.explained_variance = j.at("explained_variance").get<std::vector<double>>();
        if (m.band_means.size() != m.bands || m.comps.size() != m.bands * m.components)
            throw FormatError(path + ": inconsistent PCA model dimensions");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad PCA model file: " + e.what());
    }
}

}  // namespace clares
