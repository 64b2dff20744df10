#include "lipfem/green.hpp"

#include <algorithm>
#include <cmath>

#include "lipfem/error.hpp"
#include "lipfem/text.hpp"

namespace lipfem {

Point2 centroid_source(const FeSpace& space, Point2 p) {
    return space.mesh().centroid(space.mesh().locate(p).triangle);
}

GreenRecord discrete_green(const SpacePtr& space, const Evolver& evolver, Point2 x0, const std::vector<double>& times) {
    const Vec u0 = ph_delta(*space, evolver.mass_solver(), x0);
    return {x0, record_trajectory(space, evolver, u0, times), GreenRole::Discrete};
}

GreenRecord discrete_green(const SpacePtr& space, const CoefficientField& coeff, Point2 x0,
                           const EvolutionBackend& backend, const std::vector<double>& times) {
    const Evolver evolver(assemble_mass(*space), assemble_stiffness(*space, coeff), backend);
    return discrete_green(space, evolver, x0, times);
}

Vec reference_initial(const SpacePtr& coarse, const SpacePtr& fine, const SpdSolver& fine_mass,
                      const std::vector<int>& parent, Point2 x0) {
    const RegularizedDelta delta = regularized_delta(coarse, x0);
    return fine_mass.solve(delta_load_on_refinement(delta, *fine, parent));
}

GreenRecord reference_green(const SpacePtr& coarse, const SpacePtr& fine, const Evolver& fine_evolver, Point2 x0,
                            const std::vector<double>& times) {
    const auto parent = coarse_parent_map(fine->mesh(), coarse->mesh());
    const Vec u0 = reference_initial(coarse, fine, fine_evolver.mass_solver(), parent, x0);
    return {x0, record_trajectory(fine, fine_evolver, u0, times), GreenRole::Reference};
}

GreenRecord reference_green(const SpacePtr& coarse, const SpacePtr& fine, const CoefficientField& coeff, Point2 x0,
                            const EvolutionBackend& backend, const std::vector<double>& times) {
    const Evolver evolver(assemble_mass(*fine), assemble_stiffness(*fine, coeff), backend);
    return reference_green(coarse, fine, evolver, x0, times);
}

SampleGrid::SampleGrid(SpacePtr coarse, SpacePtr fine, int quad_order)
    : coarse_(std::move(coarse)), fine_(std::move(fine)) {
    if (coarse_->degree() != fine_->degree())
        fail(ErrorKind::GridMismatch, "coarse and fine spaces have different degrees");
    parent_ = coarse_parent_map(fine_->mesh(), coarse_->mesh());
    const auto& rule = quadrature(quad_order);
    const Mesh& fm = fine_->mesh();
    const Mesh& cm = coarse_->mesh();
    const int per = fine_->dofs_per_cell();
    const std::size_t total = static_cast<std::size_t>(fm.num_triangles()) * rule.points.size();
    points_.reserve(total);
    weights_.reserve(total);
    fine_cell_.reserve(total);
    coarse_cell_.reserve(total);
    fine_phi_.resize(total * per);
    coarse_phi_.resize(total * per);
    fine_dphi_.resize(total * per);
    coarse_dphi_.resize(total * per);
    std::size_t k = 0;
    for (int t = 0; t < fm.num_triangles(); ++t) {
        const auto c = fm.corners(t);
        const auto fgeo = fine_->geometry(t);
        const int pt = parent_[t];
        const auto cgeo = coarse_->geometry(pt);
        for (std::size_t q = 0; q < rule.points.size(); ++q, ++k) {
            const auto& l = rule.points[q];
            const Point2 x{l[0] * c[0].x1 + l[1] * c[1].x1 + l[2] * c[2].x1,
                           l[0] * c[0].x2 + l[1] * c[1].x2 + l[2] * c[2].x2};
            points_.push_back(x);
            weights_.push_back(fgeo.area * rule.weights[q]);
            fine_cell_.push_back(t);
            coarse_cell_.push_back(pt);
            const auto cb = cm.barycentric(pt, x);
            fine_->basis(l, std::span<double>(fine_phi_.data() + k * per, per));
            fine_->basis_gradients(fgeo, l, std::span<Vec2>(fine_dphi_.data() + k * per, per));
            coarse_->basis(cb, std::span<double>(coarse_phi_.data() + k * per, per));
            coarse_->basis_gradients(cgeo, cb, std::span<Vec2>(coarse_dphi_.data() + k * per, per));
        }
    }
}

void SampleGrid::sample(const FeSpace& space, const std::vector<int>& cells, const std::vector<double>& phi,
                        const std::vector<Vec2>& dphi, const Vec& u, std::vector<double>& values,
                        std::vector<Vec2>* grads) const {
    if (u.size() != space.num_dofs()) fail(ErrorKind::GridMismatch, "vector does not belong to the sampled space");
    const int per = space.dofs_per_cell();
    const std::size_t n = points_.size();
    values.resize(n);
    if (grads) grads->resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto dofs = space.cell_dofs(cells[k]);
        double v = 0.0;
        Vec2 g = Vec2::Zero();
        for (int i = 0; i < per; ++i) {
            const double c = u[dofs[i]];
            v += c * phi[k * per + i];
            if (grads) g += c * dphi[k * per + i];
        }
        values[k] = v;
        if (grads) (*grads)[k] = g;
    }
}

void SampleGrid::sample_coarse(const Vec& u, std::vector<double>& values, std::vector<Vec2>* grads) const {
    sample(*coarse_, coarse_cell_, coarse_phi_, coarse_dphi_, u, values, grads);
}

void SampleGrid::sample_fine(const Vec& u, std::vector<double>& values, std::vector<Vec2>* grads) const {
    sample(*fine_, fine_cell_, fine_phi_, fine_dphi_, u, values, grads);
}

SampledField difference_F(const GreenRecord& gh, const GreenRecord& gref, const SampleGrid& grid) {
    const auto& a = gh.trajectory;
    const auto& b = gref.trajectory;
    if (a.times.size() != b.times.size())
        fail(ErrorKind::GridMismatch, "discrete and reference kernels have different time grids");
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
            fail(ErrorKind::GridMismatch, "time " + std::to_string(i) + " differs between kernels");
    if (a.space.get() != &grid.coarse() && a.space->mesh().checksum() != grid.coarse().mesh().checksum())
        fail(ErrorKind::GridMismatch, "discrete kernel does not live on the coarse space of the grid");
    if (b.space.get() != &grid.fine() && b.space->mesh().checksum() != grid.fine().mesh().checksum())
        fail(ErrorKind::GridMismatch, "reference kernel does not live on the fine space of the grid");
    if (!(gh.source == gref.source)) fail(ErrorKind::GridMismatch, "kernels have different sources");
    SampledField F;
    F.grid = &grid;
    F.times = a.times;
    std::vector<double> fv;
    std::vector<Vec2> fg;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        std::vector<double> cv;
        std::vector<Vec2> cg;
        grid.sample_coarse(a.snapshots[i], cv, &cg);
        grid.sample_fine(b.snapshots[i], fv, &fg);
        for (std::size_t k = 0; k < cv.size(); ++k) {
            cv[k] -= fv[k];
            cg[k] -= fg[k];
        }
        F.values.push_back(std::move(cv));
        F.grads.push_back(std::move(cg));
    }
    return F;
}

void TimeDerivativeStream::emit(std::size_t slot, const std::vector<double>& d1, const std::vector<double>& d2) {
    const std::size_t node = count_ - t_.size() + slot;
    cb_(node, t_[slot], f_[slot], g_[slot], d1, d2);
}

void TimeDerivativeStream::push(double t, std::vector<double> f, std::vector<Vec2> grad) {
    if (finished_) fail(ErrorKind::InvalidArgument, "stream already finished");
    if (!t_.empty()) {
        if (!(t > t_.back())) fail(ErrorKind::InvalidArgument, "stream times must increase strictly");
        if (f.size() != f_.back().size()) fail(ErrorKind::GridMismatch, "stream samples change size");
    }
    t_.push_back(t);
    f_.push_back(std::move(f));
    g_.push_back(std::move(grad));
    ++count_;
    if (t_.size() < 3) return;
    const double h1 = t_[1] - t_[0];
    const double h2 = t_[2] - t_[1];
    const std::size_t n = f_[1].size();
    std::vector<double> d1(n), d2(n);
    const double a0 = -h2 / (h1 * (h1 + h2)), a1 = (h2 - h1) / (h1 * h2), a2 = h1 / (h2 * (h1 + h2));
    const double b0 = 2.0 / (h1 * (h1 + h2)), b1 = -2.0 / (h1 * h2), b2 = 2.0 / (h2 * (h1 + h2));
    for (std::size_t k = 0; k < n; ++k) {
        d1[k] = a0 * f_[0][k] + a1 * f_[1][k] + a2 * f_[2][k];
        d2[k] = b0 * f_[0][k] + b1 * f_[1][k] + b2 * f_[2][k];
    }
    if (count_ == 3) {
        std::vector<double> first(n);
        for (std::size_t k = 0; k < n; ++k) first[k] = (f_[1][k] - f_[0][k]) / h1;
        emit(0, first, d2);
    }
    emit(1, d1, d2);
    d2_prev_ = std::move(d2);
    t_.erase(t_.begin());
    f_.erase(f_.begin());
    g_.erase(g_.begin());
}

void TimeDerivativeStream::finish() {
    if (finished_) return;
    if (count_ < 3) fail(ErrorKind::InvalidArgument, "time derivatives need at least three snapshots");
    finished_ = true;
    const double h = t_[1] - t_[0];
    std::vector<double> last(f_[1].size());
    for (std::size_t k = 0; k < last.size(); ++k) last[k] = (f_[1][k] - f_[0][k]) / h;
    emit(1, last, d2_prev_);
}

namespace {

double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) s += 0.5 * (t[i + 1] - t[i]) * (v[i] + v[i + 1]);
    return s;
}

bool within(double t, double T) { return t <= T * (1.0 + 1e-12); }

template <class Consumer>
void feed(const SampledField& F, Consumer& consumer) {
    TimeDerivativeStream stream([&](std::size_t, double t, const std::vector<double>& f, const std::vector<Vec2>& g,
                                    const std::vector<double>& d1, const std::vector<double>& d2) {
        consumer.node(t, f, g, d1, d2);
    });
    for (std::size_t i = 0; i < F.times.size(); ++i) stream.push(F.times[i], F.values[i], F.grads[i]);
    stream.finish();
}

}  // namespace

Lemma31Accumulator::Lemma31Accumulator(const std::vector<double>& weights, double h, double T)
    : w_(weights), h_(h), T_(T) {
    if (!(h > 0.0) || !(T > 0.0)) fail(ErrorKind::InvalidArgument, "mesh size and horizon must be positive");
}

void Lemma31Accumulator::node(double t, const std::vector<double>& f, const std::vector<Vec2>& grad,
                              const std::vector<double>& d1, const std::vector<double>& d2) {
    if (!within(t, T_)) return;
    double a = 0.0, b = 0.0, c = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        a += w_[k] * std::abs(d1[k]);
        b += w_[k] * std::abs(d2[k]);
        c += w_[k] * (std::abs(f[k]) + (grad.empty() ? 0.0 : std::abs(grad[k][0]) + std::abs(grad[k][1])));
    }
    t_.push_back(t);
    a_.push_back(a);
    b_.push_back(b);
    c_.push_back(c);
}

Lemma31Record Lemma31Accumulator::result() const {
    Lemma31Record r;
    r.dtF_L1 = trapezoid(t_, a_);
    for (std::size_t i = 0; i + 1 < t_.size(); ++i)
        r.t_dttF_L1 += (t_[i + 1] - t_[i]) * 0.5 * (t_[i] + t_[i + 1]) * 0.5 * (b_[i] + b_[i + 1]);
    r.w101 = trapezoid(t_, c_);
    r.scaled_w101 = r.w101 / (h_ * log_factor(h_));
    return r;
}

Lemma31Record lemma31_functionals(const SampledField& F, double h, double T) {
    if (!F.grid) fail(ErrorKind::InvalidArgument, "sampled field has no grid");
    if (F.times.size() < 3) fail(ErrorKind::InvalidArgument, "lemma functionals need at least three snapshots");
    Lemma31Accumulator acc(F.grid->weights(), h, T);
    feed(F, acc);
    return acc.result();
}

DyadicDecomposition::DyadicDecomposition(Point2 x0, double h, double c_star, double T)
    : x0_(x0), h_(h), c_star_(c_star), T_(T) {
    if (!(h > 0.0) || !(c_star > 0.0) || !(T > 0.0))
        fail(ErrorKind::InvalidArgument, "dyadic decomposition needs positive h, C_* and T");
    const double x = 1.0 / (c_star * h);
    if (!(c_star * h < 0.25))
        fail(ErrorKind::MeshTooCoarse, "C_* h = " + format_double(c_star * h) + " must be below 1/4");
    int j = static_cast<int>(std::floor(std::log2(x)));
    while (std::ldexp(1.0, j + 1) <= x) ++j;
    while (std::ldexp(1.0, j) > x) --j;
    j_star_ = j;
}

double DyadicDecomposition::d(int j) const { return std::ldexp(1.0, -j); }

int DyadicDecomposition::classify_rho(double rho) const {
    if (rho <= d(j_star_)) return kInnermost;
    int j = static_cast<int>(std::ceil(-std::log2(rho)));
    while (d(j) > rho) ++j;
    while (2.0 * d(j) <= rho) --j;
    return std::clamp(j, 0, j_star_);
}

int DyadicDecomposition::classify(Point2 x, double t) const {
    return classify_rho(std::max(distance(x, x0_), std::sqrt(std::max(t, 0.0))));
}

WeightedKAccumulator::WeightedKAccumulator(const SampleGrid& grid, const DyadicDecomposition& decomp)
    : grid_(grid), decomp_(decomp), hits_(decomp.j_star() + 1, 0) {
    dist_.reserve(grid.size());
    for (const auto& p : grid.points()) dist_.push_back(distance(p, decomp.source()));
}

double WeightedKAccumulator::mu(int j) const {
    const double h = decomp_.h();
    return 1.0 / (h * log_factor(h)) + 1.0 / decomp_.d(j);
}

void WeightedKAccumulator::node(double t, const std::vector<double>& f, const std::vector<Vec2>& grad,
                                const std::vector<double>& d1, const std::vector<double>& d2) {
    if (!within(t, decomp_.T())) return;
    const int nj = decomp_.j_star() + 1;
    std::vector<double> a(nj, 0.0), b(nj, 0.0), c(nj, 0.0);
    const double st = std::sqrt(t);
    const auto& w = grid_.weights();
    for (std::size_t k = 0; k < f.size(); ++k) {
        const int j = decomp_.classify_rho(std::max(dist_[k], st));
        if (j == DyadicDecomposition::kInnermost) continue;
        a[j] += w[k] * d1[k] * d1[k];
        b[j] += w[k] * d2[k] * d2[k];
        c[j] += w[k] * (f[k] * f[k] + (grad.empty() ? 0.0 : grad[k].squaredNorm()));
        ++hits_[j];
    }
    t_.push_back(t);
    a_.push_back(std::move(a));
    b_.push_back(std::move(b));
    c_.push_back(std::move(c));
}

WeightedKRecord WeightedKAccumulator::result() const {
    const int nj = decomp_.j_star() + 1;
    WeightedKRecord r;
    r.K.assign(nj, 0.0);
    r.mu.assign(nj, 0.0);
    r.empty.assign(nj, 0);
    for (int j = 0; j < nj; ++j) {
        std::vector<double> a, b, c;
        for (std::size_t i = 0; i < t_.size(); ++i) {
            a.push_back(a_[i][j]);
            b.push_back(b_[i][j]);
            c.push_back(c_[i][j]);
        }
        const double dj = decomp_.d(j);
        r.mu[j] = mu(j);
        r.empty[j] = hits_[j] == 0;
        r.K[j] = std::sqrt(trapezoid(t_, a)) + dj * dj * std::sqrt(trapezoid(t_, b)) +
                 r.mu[j] * std::sqrt(trapezoid(t_, c));
        r.curlyK += dj * dj * r.K[j];
    }
    return r;
}

WeightedKRecord weighted_K_functionals(const SampledField& F, const DyadicDecomposition& decomp) {
    if (!F.grid) fail(ErrorKind::InvalidArgument, "sampled field has no grid");
    WeightedKAccumulator acc(*F.grid, decomp);
    feed(F, acc);
    return acc.result();
}

double eta_ramp(double rho) {
    if (rho <= 0.5) return 0.0;
    if (rho >= 1.0) return 1.0;
    const double s = 2.0 * (rho - 0.5);
    return s * s * (3.0 - 2.0 * s);
}

double truncation_weight(double dist, double t, double eps) {
    const double r = dist / eps;
    const double tau = t / (eps * eps);
    return eta_ramp(r * r * r * r + tau * tau);
}

std::vector<double> truncated_green(const std::vector<double>& reference, const std::vector<Point2>& points,
                                    Point2 source, double t, double eps) {
    if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "truncation scale must be positive");
    if (reference.size() != points.size()) fail(ErrorKind::GridMismatch, "values and points differ in length");
    std::vector<double> out(reference.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = reference[k] * truncation_weight(distance(points[k], source), t, eps);
    return out;
}

SchurRowAccumulator::SchurRowAccumulator(const std::vector<double>& weights, double fallback_rate)
    : w_(weights), fallback_(fallback_rate) {}

void SchurRowAccumulator::node(double t, const std::vector<double>& d1) {
    double s = 0.0;
    for (std::size_t k = 0; k < d1.size(); ++k) s += w_[k] * std::abs(d1[k]);
    t_.push_back(t);
    s_.push_back(s);
}

SchurRowAccumulator::Result SchurRowAccumulator::result() const {
    Result r;
    if (t_.empty()) return r;
    r.row_sum = trapezoid(t_, s_);
    const std::size_t last = t_.size() - 1;
    std::size_t k = last;
    while (k > 0 && t_[last] - t_[k - 1] <= 1.0) --k;
    double rate = 0.0;
    if (k < last && s_[k] > 0.0 && s_[last] > 0.0) rate = std::log(s_[k] / s_[last]) / (t_[last] - t_[k]);
    if (!(rate > 0.0) || !std::isfinite(rate)) rate = fallback_;
    r.rate = rate;
    r.tail = s_[last] / rate;
    r.row_sum += r.tail;
    return r;
}

double gaussian_envelope(const std::vector<double>& values, const std::vector<Point2>& points, Point2 x0, double t,
                         double h, double C) {
    if (!(t > 0.0)) return 0.0;
    const double st = std::sqrt(t);
    double peak = 0.0;
    for (double v : values) peak = std::max(peak, std::abs(v));
    double m = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double r = distance(points[k], x0);
        if (std::max(st, r) < 2.0 * h || std::abs(values[k]) < 1e-10 * peak) continue;
        const double s = st + r;
        m = std::max(m, std::abs(values[k]) * s * s * std::exp(r * r / (C * t)));
    }
    return m;
}

DecayRate fit_decay(const std::vector<double>& times, const std::vector<double>& norms, double t_from, double c0) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    DecayRate d;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_from || !(norms[i] > 0.0)) continue;
        const double y = std::log(norms[i]);
        sx += times[i];
        sy += y;
        sxx += times[i] * times[i];
        sxy += times[i] * y;
        ++n;
        d.constant = std::max(d.constant, norms[i] * std::exp(c0 * (times[i] - 1.0)));
    }
    if (n >= 2) d.rate = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    return d;
}

std::vector<double> graded_time_grid(double dt_min, double growth, double dt_max, double T,
                                     const std::vector<double>& stops) {
    if (!(dt_min > 0.0) || !(growth >= 0.0) || !(dt_max >= dt_min) || !(T > 0.0))
        fail(ErrorKind::InvalidArgument, "invalid graded time grid parameters");
    std::vector<double> s = stops;
    std::sort(s.begin(), s.end());
    std::vector<double> out{0.0};
    double t = 0.0;
    std::size_t next_stop = 0;
    while (next_stop < s.size() && s[next_stop] <= 0.0) ++next_stop;
    const double slack = 1e-9 * dt_min;
    while (t < T - slack) {
        // spacings are dt_min * 2^k so that the grid stays dyadic
        const double want = std::clamp(growth * t, dt_min, dt_max);
        const double spacing = std::ldexp(dt_min, static_cast<int>(std::floor(std::log2(want / dt_min) + 1e-12)));
        double next = t + spacing;
        while (next_stop < s.size() && s[next_stop] <= t + slack) ++next_stop;
        if (next_stop < s.size() && s[next_stop] < T && next >= s[next_stop] - slack) next = s[next_stop];
        if (next >= T - slack) next = T;
        out.push_back(next);
        t = next;
    }
    return out;
}

std::vector<double> log_time_grid(double t_min, double t_max, int count) {
    if (!(t_min > 0.0) || !(t_max >= t_min) || count < 1)
        fail(ErrorKind::InvalidArgument, "invalid logarithmic time grid parameters");
    if (count == 1) return {t_max};
    std::vector<double> out(count);
    const double r = std::log(t_max / t_min) / (count - 1);
    for (int i = 0; i < count; ++i) out[i] = t_min * std::exp(r * i);
    out.front() = t_min;
    out.back() = t_max;
    return out;
}

KernelSums kernel_sums(const Evolver& evolver, const SpatialNorms* l1, double t) {
    const EigenPairs& e = evolver.eigen();
    const SparseMatrix& m = evolver.mass();
    KernelSums r;
    r.t = t;
    // modes with lambda t > 60 contribute below e^{-60} relative and are dropped
    Eigen::Index modes = 0;
    while (modes < e.lambda.size() && e.lambda[modes] * t <= 60.0) ++modes;
    modes = std::max<Eigen::Index>(modes, 1);
    for (int pass = 0; pass < 2; ++pass) {
        Vec scale(modes);
        for (Eigen::Index k = 0; k < modes; ++k) {
            const double decay = std::exp(-e.lambda[k] * t);
            scale[k] = std::sqrt(pass == 0 ? decay : std::max(e.lambda[k], 0.0) * decay);
        }
        DenseMatrix g = DenseMatrix::Zero(e.psi.rows(), e.psi.rows());
        {
            const DenseMatrix c = e.psi.leftCols(modes) * scale.asDiagonal();
            g.selfadjointView<Eigen::Lower>().rankUpdate(c);
            g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
        }
        if (pass == 0 && l1) {
            for (Eigen::Index i = 0; i < g.cols(); ++i) r.kernel_l1 = std::max(r.kernel_l1, l1->lq(g.col(i), 1.0));
        }
        const DenseMatrix mg = m * g;
        double best = -1.0;
        int arg = -1;
        for (Eigen::Index i = 0; i < mg.cols(); ++i) {
            const double s = mg.col(i).cwiseAbs().sum();
            if (s > best) {
                best = s;
                arg = static_cast<int>(i);
            }
        }
        if (pass == 0) {
            r.norm = best;
            r.argmax = arg;
            r.extremal = mg.col(arg).unaryExpr([](double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; });
        } else {
            r.dt_norm = t * best;
            r.dt_argmax = arg;
        }
    }
    return r;
}

namespace {

// Streams the discrete and reference kernels of one source over the sample grid.
template <class OnNode>
void stream_difference(const SampleGrid& grid, const Evolver& coarse_evolver, const Evolver& fine_evolver, Point2 x0,
                       const std::vector<double>& times, OnNode&& on_time) {
    const SpacePtr coarse(std::shared_ptr<const FeSpace>{}, &grid.coarse());
    const SpacePtr fine(std::shared_ptr<const FeSpace>{}, &grid.fine());
    std::vector<Vec> discrete;
    discrete.reserve(times.size());
    coarse_evolver.propagate(ph_delta(grid.coarse(), coarse_evolver.mass_solver(), x0), times,
                             [&](std::size_t, double, const Vec& u) { discrete.push_back(u); });
    const Vec r0 = reference_initial(coarse, fine, fine_evolver.mass_solver(), grid.parent(), x0);
    std::vector<double> cv, fv;
    std::vector<Vec2> cg, fg;
    fine_evolver.propagate(r0, times, [&](std::size_t i, double t, const Vec& u) {
        grid.sample_coarse(discrete[i], cv, &cg);
        grid.sample_fine(u, fv, &fg);
        on_time(i, t, cv, cg, fv, fg);
    });
}

}  // namespace

std::vector<SchurSource> schur_rowsums(const SampleGrid& grid, const Evolver& coarse_evolver,
                                       const Evolver& fine_evolver, const std::vector<Point2>& sources,
                                       const std::vector<double>& times, double eps, double c0) {
    if (sources.empty()) fail(ErrorKind::InvalidArgument, "Schur sums need at least one source");
    if (times.size() < 3 || times.back() <= 1.0)
        fail(ErrorKind::InvalidArgument, "Schur sums need at least three times reaching past t = 1");
    std::vector<SchurSource> out;
    for (const Point2& y : sources) {
        SchurRowAccumulator acc(grid.weights(), c0);
        TimeDerivativeStream stream([&](std::size_t, double t, const std::vector<double>&, const std::vector<Vec2>&,
                                        const std::vector<double>& d1,
                                        const std::vector<double>&) { acc.node(t, d1); });
        stream_difference(grid, coarse_evolver, fine_evolver, y, times,
                          [&](std::size_t, double t, const std::vector<double>& cv, const std::vector<Vec2>&,
                              const std::vector<double>& fv, const std::vector<Vec2>&) {
                              std::vector<double> d(cv.size());
                              for (std::size_t k = 0; k < d.size(); ++k)
                                  d[k] = cv[k] - fv[k] * truncation_weight(distance(grid.points()[k], y), t, eps);
                              stream.push(t, std::move(d));
                          });
        stream.finish();
        const auto r = acc.result();
        out.push_back({y, r.row_sum, r.tail, r.rate});
    }
    return out;
}

SourceDiagnostics diagnose_source(const SampleGrid& grid, const Evolver& coarse_evolver, const Evolver& fine_evolver,
                                  Point2 x0, const std::vector<double>& times, const DiagnosticsOptions& opts) {
    if (std::find(times.begin(), times.end(), opts.T) == times.end())
        fail(ErrorKind::InvalidArgument, "time grid must contain the horizon T");
    const double h = grid.coarse().mesh().h();
    SourceDiagnostics out;
    out.source = x0;
    const DyadicDecomposition decomp(x0, h, opts.c_star, opts.T);
    out.j_star = decomp.j_star();
    out.eps = decomp.d(decomp.j_star());
    Lemma31Accumulator lemma(grid.weights(), h, opts.T);
    WeightedKAccumulator weighted(grid, decomp);
    SchurRowAccumulator schur(grid.weights(), opts.c0);
    TimeDerivativeStream f_stream([&](std::size_t, double t, const std::vector<double>& f, const std::vector<Vec2>& g,
                                      const std::vector<double>& d1, const std::vector<double>& d2) {
        lemma.node(t, f, g, d1, d2);
        if (opts.weighted_K) weighted.node(t, f, g, d1, d2);
    });
    TimeDerivativeStream d_stream([&](std::size_t, double t, const std::vector<double>&, const std::vector<Vec2>&,
                                      const std::vector<double>& d1,
                                      const std::vector<double>&) { schur.node(t, d1); });
    std::vector<double> l2_times, l2_norms;
    bool past_T = false;
    stream_difference(grid, coarse_evolver, fine_evolver, x0, times,
                      [&](std::size_t i, double t, const std::vector<double>& cv, const std::vector<Vec2>& cg,
                          const std::vector<double>& fv, const std::vector<Vec2>& fg) {
                          const auto& w = grid.weights();
                          double l2 = 0.0, mass = 0.0;
                          for (std::size_t k = 0; k < cv.size(); ++k) {
                              l2 += w[k] * cv[k] * cv[k];
                              mass += w[k] * cv[k];
                          }
                          l2_times.push_back(t);
                          l2_norms.push_back(std::sqrt(l2));
                          if (t == opts.T) out.mass_T = mass;
                          out.gaussian = std::max(out.gaussian,
                                                  gaussian_envelope(fv, grid.points(), x0, t, h, opts.gaussian_C));
                          if (!past_T) {
                              // one node beyond T keeps the difference at T central
                              past_T = !within(t, opts.T);
                              std::vector<double> f(cv.size());
                              std::vector<Vec2> g(cv.size());
                              for (std::size_t k = 0; k < f.size(); ++k) {
                                  f[k] = cv[k] - fv[k];
                                  g[k] = cg[k] - fg[k];
                              }
                              if (i == 0)
                                  for (std::size_t k = 0; k < f.size(); ++k) out.F0_L1 += w[k] * std::abs(f[k]);
                              f_stream.push(t, std::move(f), std::move(g));
                          }
                          if (opts.schur) {
                              std::vector<double> d(cv.size());
                              for (std::size_t k = 0; k < d.size(); ++k)
                                  d[k] = cv[k] - fv[k] * truncation_weight(distance(grid.points()[k], x0), t, out.eps);
                              d_stream.push(t, std::move(d));
                          }
                      });
    f_stream.finish();
    if (opts.schur) {
        d_stream.finish();
        out.schur = schur.result();
    }
    out.lemma = lemma.result();
    if (opts.weighted_K) out.K = weighted.result();
    out.decay = fit_decay(l2_times, l2_norms, 1.0, opts.c0);
    return out;
}

}  // namespace lipfem
