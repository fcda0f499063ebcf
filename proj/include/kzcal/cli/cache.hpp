#pragma once

// Optional on-disk cache of materialized Gaudin families, keyed by a digest of
// the exact parameter bits and weight. Enabled by KZCAL_CACHE_DIR.

#include "kzcal/operators.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

namespace kzcal::cli {

inline std::optional<std::filesystem::path> cache_dir() {
    const char* d = std::getenv("KZCAL_CACHE_DIR");
    if (!d || !*d) return std::nullopt;
    return std::filesystem::path(d);
}

namespace detail {

inline std::uint64_t mix_bits(std::uint64_t h, double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof b);
    return splitmix64(h ^ b);
}

inline constexpr char kCacheMagic[4] = {'K', 'Z', 'C', '1'};

template <class T>
void put(std::ostream& o, const T& v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool take(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

}  // namespace detail

/// Digest of everything the materialized family depends on.
inline std::uint64_t family_digest(const ModelParams& p, const WeightVector& w) {
    std::uint64_t h = fnv1a("gaudin-family");
    h = splitmix64(h ^ static_cast<std::uint64_t>(p.kind));
    for (double v : p.x) h = detail::mix_bits(h, v);
    h = splitmix64(h ^ 0x9e37u);
    for (double v : p.g) h = detail::mix_bits(h, v);
    h = detail::mix_bits(h, p.kappa);
    h = detail::mix_bits(h, p.gamma);
    for (int m : w.M) h = splitmix64(h ^ static_cast<std::uint64_t>(m));
    return h;
}

inline std::optional<std::vector<LinearOperator::Sparse>> read_family(const std::filesystem::path& file, std::size_t dim) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, detail::kCacheMagic, 4) != 0) return std::nullopt;
    std::uint64_t count = 0, rows = 0;
    if (!detail::take(in, count) || !detail::take(in, rows) || rows != dim) return std::nullopt;
    std::vector<LinearOperator::Sparse> out;
    for (std::uint64_t k = 0; k < count; ++k) {
        std::uint64_t nnz = 0;
        if (!detail::take(in, nnz)) return std::nullopt;
        std::vector<Eigen::Triplet<cplx>> trips;
        trips.reserve(nnz);
        for (std::uint64_t e = 0; e < nnz; ++e) {
            std::uint64_t r, c;
            double re, im;
            if (!detail::take(in, r) || !detail::take(in, c) || !detail::take(in, re) || !detail::take(in, im) || r >= dim ||
                c >= dim)
                return std::nullopt;
            trips.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), cplx{re, im});
        }
        LinearOperator::Sparse m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        m.setFromTriplets(trips.begin(), trips.end());
        out.push_back(std::move(m));
    }
    return out;
}

/// Writes through a temporary file and a rename so readers never see a partial file.
inline void write_family(const std::filesystem::path& file, const std::vector<LinearOperator::Sparse>& family) {
    std::filesystem::create_directories(file.parent_path());
    auto tmp = file;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) return;
        o.write(detail::kCacheMagic, 4);
        detail::put(o, static_cast<std::uint64_t>(family.size()));
        detail::put(o, static_cast<std::uint64_t>(family.empty() ? 0 : family[0].rows()));
        for (const auto& m : family) {
            detail::put(o, static_cast<std::uint64_t>(m.nonZeros()));
            for (Eigen::Index r = 0; r < m.outerSize(); ++r)
                for (LinearOperator::Sparse::InnerIterator it(m, r); it; ++it) {
                    detail::put(o, static_cast<std::uint64_t>(it.row()));
                    detail::put(o, static_cast<std::uint64_t>(it.col()));
                    detail::put(o, it.value().real());
                    detail::put(o, it.value().imag());
                }
        }
        if (!o) return;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, file, ec);
    if (ec) std::filesystem::remove(tmp, ec);
}

/// Materialized H_1..H_n, through the cache when KZCAL_CACHE_DIR is set.
inline std::vector<LinearOperator::Sparse> materialized_family(const ModelParams& params, const BasisPtr& basis) {
    const auto dir = cache_dir();
    std::filesystem::path file;
    if (dir) {
        char name[40];
        std::snprintf(name, sizeof name, "family-%016llx.bin",
                      static_cast<unsigned long long>(family_digest(params, basis->weight())));
        file = *dir / name;
        if (auto hit = read_family(file, basis->dim())) return std::move(*hit);
    }
    std::vector<LinearOperator::Sparse> H;
    for (const auto& h : gaudin_family(params, basis)) H.push_back(h.materialize());
    if (dir) write_family(file, H);
    return H;
}

}  // namespace kzcal::cli
