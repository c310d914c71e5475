#include "janus/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace janus {

namespace {

struct Covariance {
    std::vector<double> c;  // [M,M]
    Tensor mean;            // [M]
    int m = 0;
    double trace = 0.0;
};

Covariance covariance_of(const Tensor& latents) {
    if (latents.ndim() != 2) throw ConfigError("pca: latents must be [N,M]");
    const int n = latents.shape[0], m = latents.shape[1];
    if (n < 2) throw ConfigError("pca: need at least 2 samples");
    Covariance cov;
    cov.m = m;
    cov.mean = Tensor({m});
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < m; ++d)
            cov.mean.data[d] += latents.data[std::size_t(i) * m + d];
    for (int d = 0; d < m; ++d) cov.mean.data[d] /= n;
    cov.c.assign(std::size_t(m) * m, 0.0);
    std::vector<double> centered(static_cast<std::size_t>(m));
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < m; ++d)
            centered[std::size_t(d)] = latents.data[std::size_t(i) * m + d] - cov.mean.data[d];
        for (int a = 0; a < m; ++a)
            for (int b = a; b < m; ++b)
                cov.c[std::size_t(a) * m + b] += centered[std::size_t(a)] * centered[std::size_t(b)];
    }
    for (int a = 0; a < m; ++a)
        for (int b = a; b < m; ++b) {
            cov.c[std::size_t(a) * m + b] /= n;
            cov.c[std::size_t(b) * m + a] = cov.c[std::size_t(a) * m + b];
        }
    for (int d = 0; d < m; ++d) cov.trace += cov.c[std::size_t(d) * m + d];
    return cov;
}

// Power iteration on a dense symmetric PSD matrix from a fixed random start.
std::pair<Tensor, double> leading_eigen(const std::vector<double>& c, int m) {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(m));
    for (double& x : v) x = dist(rng);
    double nrm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= nrm;
    std::vector<double> w(static_cast<std::size_t>(m));
    for (int it = 0; it < 1000; ++it) {
        for (int a = 0; a < m; ++a) {
            double acc = 0.0;
            for (int b = 0; b < m; ++b) acc += c[std::size_t(a) * m + b] * v[std::size_t(b)];
            w[std::size_t(a)] = acc;
        }
        nrm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
        if (nrm < 1e-300) break;  // deflated to zero: caller decides
        double delta = 0.0;
        for (int a = 0; a < m; ++a) {
            w[std::size_t(a)] /= nrm;
            delta = std::max(delta, std::abs(w[std::size_t(a)] - v[std::size_t(a)]));
        }
        v = w;
        if (delta < 1e-12) break;
    }
    // Rayleigh quotient for the eigenvalue.
    double lambda = 0.0;
    for (int a = 0; a < m; ++a) {
        double acc = 0.0;
        for (int b = 0; b < m; ++b) acc += c[std::size_t(a) * m + b] * v[std::size_t(b)];
        lambda += v[std::size_t(a)] * acc;
    }
    Tensor dir({m});
    dir.data.assign(v.begin(), v.end());
    return {dir, lambda};
}

void fix_sign(Tensor& v) {
    int arg = 0;
    for (int i = 1; i < static_cast<int>(v.numel()); ++i)
        if (std::abs(v.data[std::size_t(i)]) > std::abs(v.data[std::size_t(arg)])) arg = i;
    if (v.data[std::size_t(arg)] < 0)
        for (double& x : v.data) x = -x;
}

}  // namespace

PcaResult pca_first_component(const Tensor& latents) {
    const Covariance cov = covariance_of(latents);
    if (!(cov.trace > 0)) throw ConfigError("pca: zero covariance (all latents identical)");
    auto [dir, lambda] = leading_eigen(cov.c, cov.m);
    fix_sign(dir);
    PcaResult r;
    r.direction = std::move(dir);
    r.explained_variance_ratio = lambda / cov.trace;
    return r;
}

Pca2 pca_two_components(const Tensor& latents) {
    Covariance cov = covariance_of(latents);
    if (!(cov.trace > 0)) throw ConfigError("pca: zero covariance (all latents identical)");
    auto [v1, l1] = leading_eigen(cov.c, cov.m);
    fix_sign(v1);
    // Deflate and repeat.
    const int m = cov.m;
    std::vector<double> c2 = cov.c;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            c2[std::size_t(a) * m + b] -= l1 * v1.data[std::size_t(a)] * v1.data[std::size_t(b)];
    auto [v2, l2] = leading_eigen(c2, m);
    if (l2 < 1e-14 * cov.trace) {
        // Degenerate (rank-1 data): take any unit vector orthogonal to v1.
        v2 = Tensor({m});
        int basis = 0;
        for (int i = 1; i < m; ++i)
            if (std::abs(v1.data[std::size_t(i)]) < std::abs(v1.data[std::size_t(basis)])) basis = i;
        v2.data[std::size_t(basis)] = 1.0;
        double dot = 0.0;
        for (int i = 0; i < m; ++i) dot += v2.data[std::size_t(i)] * v1.data[std::size_t(i)];
        for (int i = 0; i < m; ++i) v2.data[std::size_t(i)] -= dot * v1.data[std::size_t(i)];
        double nrm = 0.0;
        for (int i = 0; i < m; ++i) nrm += v2.data[std::size_t(i)] * v2.data[std::size_t(i)];
        nrm = std::sqrt(nrm);
        for (int i = 0; i < m; ++i) v2.data[std::size_t(i)] /= nrm;
        l2 = 0.0;
    }
    fix_sign(v2);
    Pca2 r;
    r.mean = std::move(cov.mean);
    r.pc1 = std::move(v1);
    r.pc2 = std::move(v2);
    r.ratio1 = l1 / cov.trace;
    r.ratio2 = l2 / cov.trace;
    return r;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ConfigError("spearman_rho: need two equal-length series of >= 2 points");
    const auto ranks = [](const std::vector<double>& x) {
        const std::size_t n = x.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return x[p] < x[q]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
            const double avg = 0.5 * (double(i) + double(j)) + 1.0;  // average 1-based rank
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) ma += ra[i], mb += rb[i];
    ma /= double(n), mb /= double(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0 || sbb == 0) return 0.0;  // a constant series carries no ordering
    return sab / std::sqrt(saa * sbb);
}

TraversalReport latent_traversal(const JanusModel& m, const Dataset& ds, int n_points) {
    ds.validate();
    const int n = ds.size();
    if (n_points < 2) throw ConfigError("latent_traversal: n_points must be >= 2");
    if (n_points > n)
        throw ConfigError("latent_traversal: n_points " + std::to_string(n_points) +
                          " exceeds dataset size " + std::to_string(n));
    const int M = m.cfg.latent_dim;
    const int O = m.cfg.khronos.output_dim;
    const std::size_t elems = ds.images.numel() / static_cast<std::size_t>(n);

    Tensor lat({n, M});
    std::vector<double> predicted(static_cast<std::size_t>(n));
    const int chunk = 64;
    for (int lo = 0; lo < n; lo += chunk) {
        const int cnt = std::min(chunk, n - lo);
        Tensor x({cnt, ds.images.shape[1], ds.images.shape[2], ds.images.shape[3]});
        std::copy_n(ds.images.data.begin() + std::ptrdiff_t(lo) * elems, std::size_t(cnt) * elems,
                    x.data.begin());
        const Tensor z = encode(m, x);
        std::copy(z.data.begin(), z.data.end(), lat.data.begin() + std::ptrdiff_t(lo) * M);
        const Tensor y = khronos_batch_forward(z, m.khronos, m.cfg.khronos);
        for (int i = 0; i < cnt; ++i) {
            const double* row = y.data.data() + std::size_t(i) * O;
            if (m.cfg.task == TaskKind::Classification)
                predicted[std::size_t(lo + i)] =
                    double(std::max_element(row, row + O) - row);
            else
                predicted[std::size_t(lo + i)] = row[0] / m.cfg.target_scale;
        }
    }

    const PcaResult pca = pca_first_component(lat);
    Tensor mean({M});
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < M; ++d) mean.data[d] += lat.data[std::size_t(i) * M + d];
    for (int d = 0; d < M; ++d) mean.data[d] /= n;
    std::vector<double> proj(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int d = 0; d < M; ++d)
            acc += (lat.data[std::size_t(i) * M + d] - mean.data[d]) * pca.direction.data[d];
        proj[std::size_t(i)] = acc;
    }

    // Empirical quantiles of the PC1 coordinate, linear interpolation.
    std::vector<double> sorted = proj;
    std::sort(sorted.begin(), sorted.end());
    std::vector<bool> used(std::size_t(n), false);
    TraversalReport rep;
    for (int k = 0; k < n_points; ++k) {
        const double p = double(k) / (n_points - 1);
        const double pos = p * (n - 1);
        const int left = static_cast<int>(std::floor(pos));
        const int right = std::min(left + 1, n - 1);
        const double q = sorted[std::size_t(left)] +
                         (pos - left) * (sorted[std::size_t(right)] - sorted[std::size_t(left)]);
        int arg = -1;
        double best = 0.0;
        for (int i = 0; i < n; ++i) {
            if (used[std::size_t(i)]) continue;
            const double d = std::abs(proj[std::size_t(i)] - q);
            if (arg < 0 || d < best) arg = i, best = d;
        }
        used[std::size_t(arg)] = true;
        TraversalPoint pt;
        pt.index = arg;
        pt.pc1 = proj[std::size_t(arg)];
        pt.z.assign(lat.data.begin() + std::ptrdiff_t(arg) * M,
                    lat.data.begin() + std::ptrdiff_t(arg + 1) * M);
        pt.true_label = ds.labels[std::size_t(arg)];
        pt.predicted = predicted[std::size_t(arg)];
        rep.points.push_back(std::move(pt));
    }
    std::sort(rep.points.begin(), rep.points.end(),
              [](const TraversalPoint& a, const TraversalPoint& b) { return a.pc1 < b.pc1; });
    for (auto& pt : rep.points) {
        Tensor zrow({1, M});
        std::copy(pt.z.begin(), pt.z.end(), zrow.data.begin());
        const Tensor img = decode(m, zrow);
        pt.image = Tensor({m.cfg.image_size, m.cfg.image_size});
        pt.image.data = img.data;
    }
    rep.spearman = spearman_rho(proj, predicted);
    return rep;
}

void write_traversal_csv(const std::string& path, const TraversalReport& rep) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "point,pc1,true_property,predicted_property\n";
    char line[256];
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        const auto& pt = rep.points[i];
        std::snprintf(line, sizeof line, "%zu,%.6g,%.6g,%.6g\n", i, pt.pc1, pt.true_label,
                      pt.predicted);
        f << line;
    }
    if (!f) throw ParseError("write failed for " + path);
}

void write_scatter_csv(const std::string& path, const JanusModel& m, const Dataset& ds) {
    ds.validate();
    const int n = ds.size();
    const int M = m.cfg.latent_dim;
    const std::size_t elems = ds.images.numel() / static_cast<std::size_t>(n);
    Tensor lat({n, M});
    const int chunk = 64;
    for (int lo = 0; lo < n; lo += chunk) {
        const int cnt = std::min(chunk, n - lo);
        Tensor x({cnt, ds.images.shape[1], ds.images.shape[2], ds.images.shape[3]});
        std::copy_n(ds.images.data.begin() + std::ptrdiff_t(lo) * elems, std::size_t(cnt) * elems,
                    x.data.begin());
        const Tensor z = encode(m, x);
        std::copy(z.data.begin(), z.data.end(), lat.data.begin() + std::ptrdiff_t(lo) * M);
    }
    const Pca2 pca = pca_two_components(lat);
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "pc1,pc2,label\n";
    char line[256];
    for (int i = 0; i < n; ++i) {
        double p1 = 0, p2 = 0;
        for (int d = 0; d < M; ++d) {
            const double c = lat.data[std::size_t(i) * M + d] - pca.mean.data[d];
            p1 += c * pca.pc1.data[d];
            p2 += c * pca.pc2.data[d];
        }
        std::snprintf(line, sizeof line, "%.6g,%.6g,%.6g\n", p1, p2, ds.labels[std::size_t(i)]);
        f << line;
    }
    if (!f) throw ParseError("write failed for " + path);
}

}  // namespace janus
