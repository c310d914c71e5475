#include "janus/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace janus {

void Dataset::validate() const {
    if (size() < 1) throw ConfigError("Dataset: empty");
    if (static_cast<int>(labels.size()) != size())
        throw ConfigError("Dataset: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(size()) + " images");
    if (target_scale <= 0) throw ConfigError("Dataset: target_scale must be > 0");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(labels[i]))
            throw ConfigError("Dataset: non-finite label at index " + std::to_string(i));
        if (kind == TaskKind::Classification) {
            const double l = labels[i];
            if (l != std::floor(l) || l < 0 || l > 9)
                throw ConfigError("Dataset: classification label " + std::to_string(l) +
                                  " at index " + std::to_string(i) + " not in {0..9}");
        }
    }
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path);
    f.seekg(0, std::ios::end);
    const auto len = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> buf(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw ParseError("short read from " + path);
    return buf;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw ParseError(path + ": truncated at byte offset " + std::to_string(off));
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto ib = read_file(images_path);
    const auto lb = read_file(labels_path);

    const std::uint32_t imagic = be32(ib, 0, images_path);
    if (imagic != 0x00000803u)
        throw ParseError(images_path + ": bad magic " + hex32(imagic) +
                         " at byte offset 0 (want 0x00000803)");
    const std::uint32_t n = be32(ib, 4, images_path);
    const std::uint32_t h = be32(ib, 8, images_path);
    const std::uint32_t w = be32(ib, 12, images_path);
    if (ib.size() != 16 + std::size_t(n) * h * w)
        throw ParseError(images_path + ": expected " + std::to_string(16 + std::size_t(n) * h * w) +
                         " bytes, have " + std::to_string(ib.size()));

    const std::uint32_t lmagic = be32(lb, 0, labels_path);
    if (lmagic != 0x00000801u)
        throw ParseError(labels_path + ": bad magic " + hex32(lmagic) +
                         " at byte offset 0 (want 0x00000801)");
    const std::uint32_t ln = be32(lb, 4, labels_path);
    if (ln != n)
        throw ParseError(labels_path + ": label count " + std::to_string(ln) + " != image count " +
                         std::to_string(n));
    if (lb.size() != 8 + std::size_t(n))
        throw ParseError(labels_path + ": expected " + std::to_string(8 + std::size_t(n)) +
                         " bytes, have " + std::to_string(lb.size()));

    Dataset ds;
    ds.kind = TaskKind::Classification;
    ds.images = Tensor({int(n), 1, int(h), int(w)});
    // Pixels quantized through float so dataset files round-trip bitwise.
    for (std::size_t i = 0; i < std::size_t(n) * h * w; ++i)
        ds.images.data[i] = double(float(ib[16 + i] / 255.0));
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const unsigned char c = lb[8 + i];
        if (c > 9)
            throw ParseError(labels_path + ": label " + std::to_string(int(c)) + " at byte offset " +
                             std::to_string(8 + i) + " not a digit");
        ds.labels[i] = double(c);
    }
    return ds;
}

void MicroGenParams::validate() const {
    if (grid < 2) throw ConfigError("MicroGenParams: grid must be >= 2");
    if (!(corr_len_min >= 1.0) || corr_len_max < corr_len_min)
        throw ConfigError("MicroGenParams: need 1 <= corr_len_min <= corr_len_max");
    if (!(phi_min > 0.0) || !(phi_max < 1.0) || phi_max < phi_min)
        throw ConfigError("MicroGenParams: need 0 < phi_min <= phi_max < 1");
    if (!(k1 > 0.0) || !(k2 > k1)) throw ConfigError("MicroGenParams: need k2 > k1 > 0");
    if (!(cg_tol > 0.0)) throw ConfigError("MicroGenParams: cg_tol must be > 0");
}

Tensor gen_gaussian_field(int size, double corr_len, std::uint64_t seed) {
    if (size < 1) throw ConfigError("gen_gaussian_field: size must be >= 1");
    if (corr_len < 1.0) throw ConfigError("gen_gaussian_field: corr_len must be >= 1");
    const int hw = size;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor field({hw, hw});
    for (double& v : field.data) v = dist(rng);

    const int radius = static_cast<int>(std::ceil(3.0 * corr_len));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        kernel[d + radius] = std::exp(-0.5 * d * d / (corr_len * corr_len));
        ksum += kernel[d + radius];
    }
    for (double& k : kernel) k /= ksum;

    // Separable blur with periodic wrap: rows then columns.
    Tensor tmp({hw, hw});
    for (int i = 0; i < hw; ++i)
        for (int j = 0; j < hw; ++j) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int jj = (j + d) % hw;
                if (jj < 0) jj += hw;
                acc += kernel[d + radius] * field.data[std::size_t(i) * hw + jj];
            }
            tmp.data[std::size_t(i) * hw + j] = acc;
        }
    for (int i = 0; i < hw; ++i)
        for (int j = 0; j < hw; ++j) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int ii = (i + d) % hw;
                if (ii < 0) ii += hw;
                acc += kernel[d + radius] * tmp.data[std::size_t(ii) * hw + j];
            }
            field.data[std::size_t(i) * hw + j] = acc;
        }

    const std::size_t n = field.numel();
    double mean = 0.0;
    for (double v : field.data) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : field.data) var += (v - mean) * (v - mean);
    var /= double(n);
    const double sd = std::sqrt(std::max(var, 1e-300));
    for (double& v : field.data) v = (v - mean) / sd;
    return field;
}

Tensor threshold_to_fraction(const Tensor& field, double phi) {
    if (field.ndim() != 2) throw ConfigError("threshold_to_fraction: field must be [H,W]");
    if (!(phi > 0.0 && phi < 1.0)) throw ConfigError("threshold_to_fraction: need 0 < phi < 1");
    const std::size_t n = field.numel();
    const auto ones = static_cast<std::size_t>(std::llround(phi * double(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return field.data[a] > field.data[b];
    });
    Tensor out(field.shape);
    for (std::size_t k = 0; k < ones && k < n; ++k) out.data[idx[k]] = 1.0;
    return out;
}

ConductivitySolution effective_conductivity(const Tensor& image, double k1, double k2, double tol) {
    if (image.ndim() != 2) throw ConfigError("effective_conductivity: image must be [H,W]");
    if (!(k1 > 0) || !(k2 > 0)) throw ConfigError("effective_conductivity: conductivities must be > 0");
    const int h = image.shape[0], w = image.shape[1];
    const std::size_t n = std::size_t(h) * w;
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = image.data[i];
        if (v != 0.0 && v != 1.0)
            throw ConfigError("effective_conductivity: image must be binary, found " +
                              std::to_string(v));
        k[i] = v == 1.0 ? k2 : k1;
    }
    const auto at = [w](int i, int j) { return std::size_t(i) * w + j; };
    const auto harm = [](double a, double b) { return 2.0 * a * b / (a + b); };

    // Conductances: gx[i][j] couples (i,j-1)-(i,j) interior faces plus the two
    // Dirichlet boundaries; gy couples vertical neighbors.
    std::vector<double> gx(std::size_t(h) * (w + 1)), gy;
    gy.assign(n, 0.0);
    for (int i = 0; i < h; ++i) {
        gx[std::size_t(i) * (w + 1)] = 2.0 * k[at(i, 0)];
        for (int j = 1; j < w; ++j)
            gx[std::size_t(i) * (w + 1) + j] = harm(k[at(i, j - 1)], k[at(i, j)]);
        gx[std::size_t(i) * (w + 1) + w] = 2.0 * k[at(i, w - 1)];
    }
    for (int i = 0; i + 1 < h; ++i)
        for (int j = 0; j < w; ++j) gy[at(i, j)] = harm(k[at(i, j)], k[at(i + 1, j)]);

    std::vector<double> diag(n, 0.0), b(n, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double d = gx[std::size_t(i) * (w + 1) + j] + gx[std::size_t(i) * (w + 1) + j + 1];
            if (i > 0) d += gy[at(i - 1, j)];
            if (i + 1 < h) d += gy[at(i, j)];
            diag[at(i, j)] = d;
        }
    for (int i = 0; i < h; ++i) b[at(i, 0)] = gx[std::size_t(i) * (w + 1)] * 1.0;  // T_left = 1

    const auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double acc = diag[at(i, j)] * x[at(i, j)];
                if (j > 0) acc -= gx[std::size_t(i) * (w + 1) + j] * x[at(i, j - 1)];
                if (j + 1 < w) acc -= gx[std::size_t(i) * (w + 1) + j + 1] * x[at(i, j + 1)];
                if (i > 0) acc -= gy[at(i - 1, j)] * x[at(i - 1, j)];
                if (i + 1 < h) acc -= gy[at(i, j)] * x[at(i + 1, j)];
                y[at(i, j)] = acc;
            }
    };

    // Linear profile start: exact for any laterally uniform medium.
    std::vector<double> T(n);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) T[at(i, j)] = 1.0 - (j + 0.5) / w;

    std::vector<double> r(n), z(n), p(n), Ap(n);
    apply(T, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const auto norm = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    const double r0 = norm(r);
    ConductivitySolution sol;
    sol.initial_residual = r0;
    const int max_iter = 10 * h * w;
    int it = 0;
    double rnorm = r0;
    if (r0 > 0.0) {
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        p = z;
        double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
        while (rnorm > tol * r0) {
            if (it >= max_iter)
                throw SolverError("CG stalled after " + std::to_string(it) +
                                  " iterations, relative residual " + std::to_string(rnorm / r0));
            apply(p, Ap);
            const double pAp = std::inner_product(p.begin(), p.end(), Ap.begin(), 0.0);
            if (!(pAp > 0)) throw SolverError("CG lost positive definiteness (pAp=" +
                                              std::to_string(pAp) + ")");
            const double alpha = rz / pAp;
            for (std::size_t i = 0; i < n; ++i) {
                T[i] += alpha * p[i];
                r[i] -= alpha * Ap[i];
            }
            for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
            const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
            rnorm = norm(r);
            ++it;
        }
    }
    sol.cg_iterations = it;
    sol.residual_norm = rnorm;
    sol.temperature = Tensor({h, w});
    sol.temperature.data.assign(T.begin(), T.end());

    double flux = 0.0;  // total heat entering through the left boundary
    for (int i = 0; i < h; ++i) flux += gx[std::size_t(i) * (w + 1)] * (1.0 - T[at(i, 0)]);
    sol.k_eff = flux * w / h;  // Q / (cross-section * gradient), gradient = 1/W
    return sol;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto splitmix = [](std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    };
    return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

Dataset build_micro_dataset(int n, const MicroGenParams& params, std::uint64_t seed) {
    if (n < 1) throw ConfigError("build_micro_dataset: n must be >= 1");
    params.validate();
    const int g = params.grid;
    Dataset ds;
    ds.kind = TaskKind::Regression;
    ds.images = Tensor({n, 1, g, g});
    ds.labels.resize(static_cast<std::size_t>(n));
    const std::size_t img_elems = std::size_t(g) * g;
    for (int i = 0; i < n; ++i) {
        bool done = false;
        std::string last_err;
        for (int attempt = 0; attempt <= 3 && !done; ++attempt) {
            const std::uint64_t s = mix_seed(seed, std::uint64_t(i), std::uint64_t(attempt));
            std::mt19937_64 rng(s);
            std::uniform_real_distribution<double> ul(params.corr_len_min, params.corr_len_max);
            std::uniform_real_distribution<double> up(params.phi_min, params.phi_max);
            const double ell = ul(rng);
            const double phi = up(rng);
            const Tensor field = gen_gaussian_field(g, ell, mix_seed(s, 0x6669656c64ull));
            const Tensor img = threshold_to_fraction(field, phi);
            try {
                const auto sol = effective_conductivity(img, params.k1, params.k2, params.cg_tol);
                std::copy(img.data.begin(), img.data.end(),
                          ds.images.data.begin() + std::ptrdiff_t(i) * img_elems);
                ds.labels[i] = double(float(sol.k_eff));
                done = true;
            } catch (const SolverError& e) {
                last_err = e.what();
            }
        }
        if (!done)
            throw SolverError("sample " + std::to_string(i) + " failed after 4 attempts: " +
                              last_err);
    }
    return ds;
}

namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32le(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& path) {
    if (off + 4 > b.size())
        throw ParseError(path + ": truncated at byte offset " + std::to_string(off));
    return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) |
           (std::uint32_t(b[off + 2]) << 16) | (std::uint32_t(b[off + 3]) << 24);
}

void put_f32le(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32le(os, u);
}

float get_f32le(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    const std::uint32_t u = get_u32le(b, off, path);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
    ds.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f.write("JNSD", 4);
    const unsigned char ver = 1;
    const unsigned char kind = ds.kind == TaskKind::Classification ? 0 : 1;
    f.write(reinterpret_cast<const char*>(&ver), 1);
    f.write(reinterpret_cast<const char*>(&kind), 1);
    put_u32le(f, std::uint32_t(ds.images.shape[0]));
    put_u32le(f, std::uint32_t(ds.images.shape[2]));
    put_u32le(f, std::uint32_t(ds.images.shape[3]));
    for (double v : ds.images.data) put_f32le(f, float(v));
    for (double v : ds.labels) put_f32le(f, float(v));
    const double ts = ds.target_scale;
    std::uint64_t u;
    std::memcpy(&u, &ts, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    f.write(reinterpret_cast<char*>(b), 8);
    if (!f) throw ParseError("write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    const auto buf = read_file(path);
    if (buf.size() < 18 || std::memcmp(buf.data(), "JNSD", 4) != 0)
        throw ParseError(path + ": bad magic at byte offset 0 (want \"JNSD\")");
    if (buf[4] != 1)
        throw ParseError(path + ": unsupported version " + std::to_string(int(buf[4])));
    if (buf[5] > 1) throw ParseError(path + ": bad kind byte " + std::to_string(int(buf[5])));
    const std::uint32_t n = get_u32le(buf, 6, path);
    const std::uint32_t h = get_u32le(buf, 10, path);
    const std::uint32_t w = get_u32le(buf, 14, path);
    const std::size_t want = 18 + 4 * (std::size_t(n) * h * w + n) + 8;
    if (buf.size() != want)
        throw ParseError(path + ": expected " + std::to_string(want) + " bytes, have " +
                         std::to_string(buf.size()));
    Dataset ds;
    ds.kind = buf[5] == 0 ? TaskKind::Classification : TaskKind::Regression;
    ds.images = Tensor({int(n), 1, int(h), int(w)});
    std::size_t off = 18;
    for (std::size_t i = 0; i < std::size_t(n) * h * w; ++i, off += 4)
        ds.images.data[i] = double(get_f32le(buf, off, path));
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i, off += 4) ds.labels[i] = double(get_f32le(buf, off, path));
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(buf[off + i]) << (8 * i);
    double ts;
    std::memcpy(&ts, &u, 8);
    ds.target_scale = ts;
    ds.validate();
    return ds;
}

void write_pgm(const std::string& path, const Tensor& image) {
    const Tensor* img = &image;
    Tensor squeezed;
    if (image.ndim() != 2) {
        std::vector<int> sq;
        for (int d : image.shape)
            if (d != 1) sq.push_back(d);
        if (sq.size() != 2)
            throw ConfigError("write_pgm: expected a single-channel image, got " +
                              shape_str(image.shape));
        squeezed.shape = sq;
        squeezed.data = image.data;
        img = &squeezed;
    }
    const int h = img->shape[0], w = img->shape[1];
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "P5\n" << w << " " << h << "\n255\n";
    for (double v : img->data) {
        const double c = std::clamp(v, 0.0, 1.0);
        const unsigned char byte = static_cast<unsigned char>(std::llround(c * 255.0));
        f.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!f) throw ParseError("write failed for " + path);
}

}  // namespace janus
