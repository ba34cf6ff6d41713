#include "orthomg/smoothers.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "orthomg/errors.hpp"

namespace orthomg {

namespace {

struct Box {
    std::array<std::size_t, 3> lo{0, 0, 0};
    std::array<std::size_t, 3> hi{1, 1, 1};

    std::size_t cells(int d) const
    {
        std::size_t c = 1;
        for (int a = 0; a < d; ++a) {
            c *= hi[a] - lo[a];
        }
        return c;
    }
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

bool bisect(const Box& box, std::size_t parts, int d, std::vector<Box>& out)
{
    if (parts == 1) {
        out.push_back(box);
        return true;
    }
    int axis = 0;
    for (int a = 1; a < d; ++a) {
        if (box.hi[a] - box.lo[a] > box.hi[axis] - box.lo[axis]) {
            axis = a;
        }
    }
    const std::size_t len = box.hi[axis] - box.lo[axis];
    const std::size_t cross = box.cells(d) / len;
    const std::size_t left_parts = parts / 2;
    const std::size_t right_parts = parts - left_parts;
    const std::size_t min_cut = ceil_div(left_parts, cross);
    if (len < ceil_div(right_parts, cross) + min_cut) {
        return false;
    }
    const std::size_t max_cut = len - ceil_div(right_parts, cross);
    const std::size_t cut =
        std::clamp((len * left_parts + parts / 2) / parts, min_cut, max_cut);

    Box left = box;
    Box right = box;
    left.hi[axis] = box.lo[axis] + cut;
    right.lo[axis] = box.lo[axis] + cut;
    return bisect(left, left_parts, d, out) && bisect(right, right_parts, d, out);
}

std::size_t largest_power_of_two_at_most(std::size_t n)
{
    std::size_t p = 1;
    while (p * 2 <= n) {
        p *= 2;
    }
    return p;
}

void check_residual(std::span<const double> rho, const char* who)
{
    if (!all_finite(rho)) {
        throw NumericalFailure(std::string(who) + ": non-finite residual during smoothing");
    }
}

}  // namespace

Partition partition_cells(GridShape shape, std::size_t n_subdomains, std::size_t overlap)
{
    const int d = shape.dimension;
    if (d < 1 || d > 3) {
        throw InvalidInput("partition_cells: dimension must be 1, 2 or 3");
    }
    const std::size_t n = shape.cells_per_axis;
    const std::size_t total = shape.n_cells();
    if (n_subdomains == 0 || n_subdomains > total) {
        throw InvalidInput("partition_cells: need 1 <= n_subdomains <= " + std::to_string(total) +
                           ", got " + std::to_string(n_subdomains));
    }

    Box whole;
    for (int a = 0; a < d; ++a) {
        whole.hi[a] = n;
    }
    std::vector<Box> boxes;
    if (!bisect(whole, n_subdomains, d, boxes)) {
        throw InvalidInput("partition_cells: " + std::to_string(n_subdomains) +
                           " subdomains cannot be reached by bisecting this grid; " +
                           std::to_string(largest_power_of_two_at_most(total)) +
                           " is achievable");
    }

    Partition p;
    p.n_subdomains = n_subdomains;
    p.overlap = overlap;
    std::vector<std::size_t> stride{1, n, n * n};
    std::vector<std::size_t> layer_mark(total, 0);
    std::size_t mark = 0;
    for (const Box& b : boxes) {
        std::vector<std::size_t> core;
        core.reserve(b.cells(d));
        for (std::size_t k = b.lo[2]; k < b.hi[2]; ++k) {
            for (std::size_t j = b.lo[1]; j < b.hi[1]; ++j) {
                for (std::size_t i = b.lo[0]; i < b.hi[0]; ++i) {
                    core.push_back(i + j * stride[1] + k * stride[2]);
                }
            }
        }
        // Breadth-first growth over face neighbours.
        ++mark;
        std::vector<std::size_t> extended = core;
        for (auto c : core) {
            layer_mark[c] = mark;
        }
        std::vector<std::size_t> frontier = core;
        for (std::size_t layer = 0; layer < overlap && !frontier.empty(); ++layer) {
            std::vector<std::size_t> next;
            for (auto c : frontier) {
                for (int a = 0; a < d; ++a) {
                    const std::size_t coord = (c / stride[a]) % n;
                    if (coord > 0 && layer_mark[c - stride[a]] != mark) {
                        layer_mark[c - stride[a]] = mark;
                        next.push_back(c - stride[a]);
                    }
                    if (coord + 1 < n && layer_mark[c + stride[a]] != mark) {
                        layer_mark[c + stride[a]] = mark;
                        next.push_back(c + stride[a]);
                    }
                }
            }
            extended.insert(extended.end(), next.begin(), next.end());
            frontier = std::move(next);
        }
        std::sort(core.begin(), core.end());
        std::sort(extended.begin(), extended.end());
        p.core.push_back(std::move(core));
        p.extended.push_back(std::move(extended));
    }
    return p;
}


namespace {

// Visits the entries of A[idx, idx] as (local row, local col, value).
template <typename Fn>
void for_each_principal_entry(const CsrMatrix& a, std::span<const std::size_t> idx, Fn&& fn)
{
    const std::size_t m = idx.size();
    for (std::size_t li = 0; li < m; ++li) {
        const auto gi = idx[li];
        std::size_t lj = 0;
        for (auto k = a.row_offsets[gi]; k < a.row_offsets[gi + 1] && lj < m; ++k) {
            const auto col = a.col_indices[k];
            while (lj < m && idx[lj] < col) {
                ++lj;
            }
            if (lj < m && idx[lj] == col) {
                fn(li, lj, a.values[k]);
            }
        }
    }
}

}  // namespace

template <typename Real>
BandMatrix<Real> principal_band(const CsrMatrix& a, std::span<const std::size_t> idx)
{
    std::size_t lower = 0;
    std::size_t upper = 0;
    for_each_principal_entry(a, idx, [&](std::size_t i, std::size_t j, double) {
        lower = std::max(lower, i > j ? i - j : 0);
        upper = std::max(upper, j > i ? j - i : 0);
    });
    BandMatrix<Real> band(idx.size(), lower, upper);
    for_each_principal_entry(a, idx, [&](std::size_t i, std::size_t j, double v) {
        band(i, j) = static_cast<Real>(v);
    });
    return band;
}

template BandMatrix<double> principal_band<double>(const CsrMatrix&, std::span<const std::size_t>);
template BandMatrix<float> principal_band<float>(const CsrMatrix&, std::span<const std::size_t>);

SchwarzSmoother SchwarzSmoother::setup(const CsrMatrix& a, Partition partition,
                                       Precision precision, std::size_t iterations)
{
    if (iterations == 0) {
        throw InvalidInput("schwarz_setup: iterations must be >= 1");
    }
    std::vector<bool> covered(a.n_rows, false);
    for (const auto& core : partition.core) {
        for (auto c : core) {
            if (c >= a.n_rows) {
                throw InvalidInput("schwarz_setup: partition index " + std::to_string(c) +
                                   " outside matrix of size " + std::to_string(a.n_rows));
            }
            covered[c] = true;
        }
    }
    if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
        throw InvalidInput("schwarz_setup: partition does not cover the matrix");
    }

    SchwarzSmoother s;
    s.partition_ = std::move(partition);
    s.precision_ = precision;
    s.iterations_ = iterations;
    for (std::size_t i = 0; i < s.partition_.extended.size(); ++i) {
        const auto& ext = s.partition_.extended[i];
        try {
            if (precision == Precision::float64) {
                s.factors64_.emplace_back(principal_band<double>(a, ext));
            } else {
                s.factors32_.emplace_back(principal_band<float>(a, ext));
            }
        } catch (const SingularMatrix&) {
            throw SingularMatrix("schwarz_setup: singular local matrix in subdomain " +
                                     std::to_string(i),
                                 i);
        }
    }
    return s;
}

Vector SchwarzSmoother::solve_local(std::size_t subdomain, std::span<const double> rhs) const
{
    return precision_ == Precision::float64 ? factors64_.at(subdomain).solve(rhs)
                                            : factors32_.at(subdomain).solve(rhs);
}

Vector SchwarzSmoother::apply(const CsrMatrix& a, std::span<const double> r,
                              WorkerPool* pool) const
{
    return apply(a, r, iterations_, pool);
}

Vector SchwarzSmoother::apply(const CsrMatrix& a, std::span<const double> r,
                              std::size_t n_iterations, WorkerPool* pool) const
{
    if (r.size() != a.n_rows) {
        throw InvalidInput("schwarz_apply: residual has " + std::to_string(r.size()) +
                           " entries, expected " + std::to_string(a.n_rows));
    }
    if (n_iterations == 0) {
        throw InvalidInput("schwarz_apply: n_iterations must be >= 1");
    }
    const std::size_t n_sub = partition_.extended.size();
    Vector z(r.size(), 0.0);
    Vector rho(r.begin(), r.end());
    std::vector<Vector> local(n_sub);

    for (std::size_t it = 0; it < n_iterations; ++it) {
        if (it > 0) {
            residual_into(a, z, r, rho);
        }
        check_residual(rho, "schwarz_apply");
        auto solve = [&](std::size_t i) {
            const auto& ext = partition_.extended[i];
            Vector& e = local[i];
            e.resize(ext.size());
            for (std::size_t k = 0; k < ext.size(); ++k) {
                e[k] = rho[ext[k]];
            }
            if (precision_ == Precision::float64) {
                factors64_[i].solve_in_place(e);
            } else {
                factors32_[i].solve_in_place(e);
            }
        };
        if (pool != nullptr) {
            pool->parallel_for(n_sub, solve);
        } else {
            for (std::size_t i = 0; i < n_sub; ++i) {
                solve(i);
            }
        }
        // Overlapping contributions are summed in fixed subdomain order.
        for (std::size_t i = 0; i < n_sub; ++i) {
            const auto& ext = partition_.extended[i];
            for (std::size_t k = 0; k < ext.size(); ++k) {
                z[ext[k]] += local[i][k];
            }
        }
    }
    return z;
}

DenseMatrix<double> principal_submatrix(const CsrMatrix& a, std::span<const std::size_t> idx)
{
    DenseMatrix<double> block(idx.size(), idx.size());
    for_each_principal_entry(a, idx,
                             [&](std::size_t i, std::size_t j, double v) { block(i, j) = v; });
    return block;
}

BlockJacobiSmoother BlockJacobiSmoother::setup(const CsrMatrix& a, GridShape shape,
                                               std::size_t tile_cells_per_axis, double omega,
                                               std::size_t sweeps)
{
    const std::size_t n = shape.cells_per_axis;
    if (tile_cells_per_axis == 0 || n % tile_cells_per_axis != 0) {
        throw InvalidInput("bj_setup: tile size " + std::to_string(tile_cells_per_axis) +
                           " does not divide " + std::to_string(n) + " cells per axis");
    }
    if (shape.n_cells() != a.n_rows) {
        throw InvalidInput("bj_setup: grid shape does not match matrix size");
    }
    if (sweeps == 0) {
        throw InvalidInput("bj_setup: sweeps must be >= 1");
    }
    const int d = shape.dimension;
    const std::size_t t = tile_cells_per_axis;
    const std::size_t tiles = n / t;
    std::size_t n_blocks = 1;
    for (int a_ = 0; a_ < d; ++a_) {
        n_blocks *= tiles;
    }

    BlockJacobiSmoother s;
    s.omega_ = omega;
    s.sweeps_ = sweeps;
    s.blocks_.resize(n_blocks);
    for (std::size_t c = 0; c < a.n_rows; ++c) {
        std::size_t rest = c;
        std::size_t block = 0;
        std::size_t scale = 1;
        for (int ax = 0; ax < d; ++ax) {
            block += ((rest % n) / t) * scale;
            rest /= n;
            scale *= tiles;
        }
        s.blocks_[block].push_back(c);
    }
    s.inverses_.reserve(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        try {
            s.inverses_.push_back(
                lu_factor(principal_submatrix(a, s.blocks_[b])).inverse());
        } catch (const SingularMatrix&) {
            throw SingularMatrix("bj_setup: singular diagonal block " + std::to_string(b), b);
        }
    }
    return s;
}

Vector BlockJacobiSmoother::apply(const CsrMatrix& a, std::span<const double> r,
                                  WorkerPool* pool) const
{
    if (r.size() != a.n_rows) {
        throw InvalidInput("bj_apply: residual has " + std::to_string(r.size()) +
                           " entries, expected " + std::to_string(a.n_rows));
    }
    Vector z(r.size(), 0.0);
    Vector rho(r.begin(), r.end());
    for (std::size_t sweep = 0; sweep < sweeps_; ++sweep) {
        if (sweep > 0) {
            residual_into(a, z, r, rho);
        }
        check_residual(rho, "bj_apply");
        // Blocks are disjoint, so concurrent updates of z never overlap.
        auto update = [&](std::size_t b) {
            const auto& idx = blocks_[b];
            const auto& inv = inverses_[b];
            Vector local(idx.size());
            Vector delta(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                local[k] = rho[idx[k]];
            }
            inv.multiply_into(local, delta);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                z[idx[k]] += omega_ * delta[k];
            }
        };
        if (pool != nullptr) {
            pool->parallel_for(blocks_.size(), update);
        } else {
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                update(b);
            }
        }
    }
    return z;
}

}  // namespace orthomg
