#include "setdist/setdist.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace setdist;

namespace {

Curve exp_curve(const GridPtr& grid, double z) {
    return Curve::from_function(grid, [z](double x) { return std::exp(-z * x); }, 0.0);
}

// analytic weighted integral of an exponential pair in the equivalent norm
double exp_pair_ip(double y, double z, double gamma) { return y * z / (y + z - gamma); }

} // namespace

TEST_CASE("grid construction and validation") {
    auto g = Grid::log_spaced(30.0, 128);
    REQUIRE(g->front() == 0.0);
    REQUIRE(g->back() == 30.0);
    REQUIRE(g->size() == 128);
    for (std::size_t i = 1; i < g->size(); ++i)
        REQUIRE((*g)[i] > (*g)[i - 1]);

    auto gi = Grid::uniform_interior(0.0, 1.0, 7);
    REQUIRE(gi->front() == Catch::Approx(1.0 / 8.0));
    REQUIRE(gi->back() == Catch::Approx(7.0 / 8.0));

    REQUIRE_THROWS_AS(Grid::uniform(1.0, 0.0, 4), DegenerateGridError);
    REQUIRE_THROWS_AS(Grid({}, GridKind::Uniform), DegenerateGridError);
    REQUIRE_THROWS_AS(Grid({0.0, 0.0, 1.0}, GridKind::Uniform), DegenerateGridError);
}

TEST_CASE("curve invariants") {
    auto g = Grid::uniform(0.0, 1.0, 5);
    REQUIRE_THROWS_AS(Curve(g, {1.0, 2.0}), GridMismatchError);
    Curve a = Curve::constant(g, 2.0);
    Curve b = Curve::from_function(g, [](double x) { return x; });
    Curve c = a + b;
    REQUIRE(c.values[4] == Catch::Approx(3.0));
    REQUIRE_FALSE(c.value_at_infinity.has_value());
}

TEST_CASE("inner product: constant curve in the weighted space") {
    auto grid = Grid::log_spaced(30.0, 2048);
    auto space = SpaceDescriptor::filipovic(0.1, grid);
    const Curve one = Curve::constant(grid, 1.0, 1.0);
    // derivative of a constant vanishes on the grid, leaving the limit pairing
    REQUIRE(inner_product(space, one, one) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("inner product: exponential pair against the analytic integral") {
    const double gamma = 0.1, y = 0.8, z = 1.3;
    auto grid = Grid::log_spaced(30.0, 8001);
    auto space = SpaceDescriptor::filipovic(gamma, grid);
    const Curve h = exp_curve(grid, y);
    const Curve g = exp_curve(grid, z);
    const double closed = exp_pair_ip(y, z, gamma); // y z / (y + z - gamma) = 0.52
    REQUIRE(closed == Catch::Approx(0.52));
    const double lib = inner_product(space, h, g);
    REQUIRE(lib == Catch::Approx(closed).epsilon(1e-6));
    // independent quadrature oracle with analytic derivatives at fine resolution
    const double oracle = oracles::filipovic_ip([y](double x) { return -y * std::exp(-y * x); },
                                                [z](double x) { return -z * std::exp(-z * x); },
                                                0.0, 0.0, gamma, 30.0, 2000000);
    REQUIRE(closed == Catch::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("inner product: L2 eigencurve matches the fine-grid quadrature oracle") {
    const double kappa = 0.5;
    auto grid = Grid::uniform_interior(0.0, 1.0, 16383);
    auto space = SpaceDescriptor::l2_unit_interval(grid);
    const Curve u1 = rate_eigenfunction(grid, kappa, 1);
    const double lib = inner_product(space, u1, u1);
    auto u1f = [kappa](double x) { return std::exp(-x / kappa) * std::sin(M_PI * x); };
    const double oracle = oracles::l2_ip(u1f, u1f, 163840);
    REQUIRE(lib > 0.0);
    REQUIRE(lib == Catch::Approx(oracle).margin(1e-8));
}

TEST_CASE("inner product error paths") {
    auto grid = Grid::log_spaced(30.0, 256);
    auto grid2 = Grid::log_spaced(30.0, 257);
    auto space = SpaceDescriptor::filipovic(0.1, grid);
    const Curve h = exp_curve(grid, 1.0);
    const Curve g2 = exp_curve(grid2, 1.0);
    REQUIRE_THROWS_AS(inner_product(space, h, g2), GridMismatchError);
    Curve no_inf = h;
    no_inf.value_at_infinity.reset();
    REQUIRE_THROWS_AS(inner_product(space, h, no_inf), IncompleteCurveError);
    REQUIRE_THROWS_AS(SpaceDescriptor::filipovic(-0.5, grid), ValidationError);
}

TEST_CASE("norm: zero curve and the exponential difference closed form") {
    const double gamma = 0.1, y = 0.8, z = 1.3;
    auto grid = Grid::log_spaced(30.0, 8001);
    auto space = SpaceDescriptor::filipovic(gamma, grid);
    REQUIRE(norm(space, Curve::zeros(grid, 0.0)) == 0.0);

    const Curve diff = exp_curve(grid, y) - exp_curve(grid, z);
    const double closed_sq = y * y / (2 * y - gamma) + z * z / (2 * z - gamma) -
                             2 * exp_pair_ip(y, z, gamma);
    const double lib = norm(space, diff);
    REQUIRE(lib * lib == Catch::Approx(closed_sq).epsilon(2e-6));
    // local-Lipschitz proof bound on ||e^{-y.} - e^{-z.}||^2 for y <= z
    const double d = 2.0 / (2 * y - gamma);
    const double bound = d * (1.0 + 2.0 * z * z / ((2 * y - gamma) * (2 * y - gamma))) *
                         (y - z) * (y - z);
    REQUIRE(closed_sq <= bound);
}

TEST_CASE("norm: original (value-at-zero) form differs as expected") {
    const double gamma = 0.1, z = 1.0;
    auto grid = Grid::log_spaced(30.0, 4001);
    auto equivalent = SpaceDescriptor::filipovic(gamma, grid, FilipovicNormForm::Equivalent);
    auto original = SpaceDescriptor::filipovic(gamma, grid, FilipovicNormForm::Original);
    const Curve h = exp_curve(grid, z);
    // equivalent: h(inf)^2 + I = I; original: h(0)^2 + I = 1 + I
    const double ne = inner_product(equivalent, h, h);
    const double no = inner_product(original, h, h);
    REQUIRE(no - ne == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norm: graph norm of an eigencurve") {
    const double kappa = 0.5;
    auto grid = Grid::uniform_interior(0.0, 1.0, 1023);
    auto space = SpaceDescriptor::l2_unit_interval(grid);
    auto graph = SpaceDescriptor::graph_norm(space, second_order_generator(kappa, grid));
    const Curve u1 = rate_eigenfunction(grid, kappa, 1);
    const double lam = rate_eigenvalue(kappa, 1);
    const double base_norm = norm(space, u1);
    const double expected = std::sqrt(1.0 + lam * lam) * base_norm;
    REQUIRE(norm(graph, u1) == Catch::Approx(expected).epsilon(1e-4));
}

TEST_CASE("differentiate: polynomial and exponential accuracy") {
    auto grid = Grid::uniform(0.0, 2.0, 101);
    const Curve lin = Curve::from_function(grid, [](double x) { return 2.0 * x + 0.3; });
    const Curve dlin = differentiate(lin);
    for (double v : dlin.values)
        REQUIRE(v == Catch::Approx(2.0).margin(1e-11));

    const Curve cst = Curve::constant(grid, 5.0);
    for (double v : differentiate(cst).values)
        REQUIRE(v == Catch::Approx(0.0).margin(1e-12));

    // halving the step divides the worst error by about four
    auto err_at = [](std::size_t n) {
        auto g = Grid::uniform(0.0, 2.0, n);
        const Curve e = Curve::from_function(g, [](double x) { return std::exp(-x); });
        const Curve de = differentiate(e);
        double worst = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i)
            worst = std::max(worst, std::abs(de.values[i] + std::exp(-(*g)[i])));
        return worst;
    };
    const double r = err_at(201) / err_at(401);
    REQUIRE(r > 3.5);
    REQUIRE(r < 4.5);

    auto tiny = Grid::uniform(0.0, 1.0, 2);
    REQUIRE_THROWS_AS(differentiate(Curve::constant(tiny, 1.0)), DegenerateGridError);
}

TEST_CASE("apply_generator: second-order operator eigenrelation") {
    const double kappa = 0.5;
    auto check = [&](std::size_t n_pts, int mode) {
        auto grid = Grid::uniform_interior(0.0, 1.0, n_pts);
        auto op = second_order_generator(kappa, grid);
        const Curve u = rate_eigenfunction(grid, kappa, mode);
        const Curve au = apply_generator(op, u);
        const double lam = rate_eigenvalue(kappa, mode);
        double worst = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            worst = std::max(worst, std::abs(au.values[i] - lam * u.values[i]));
            scale = std::max(scale, std::abs(lam * u.values[i]));
        }
        return worst / scale;
    };
    for (int mode : {1, 2, 4}) {
        const double r = check(255, mode) / check(511, mode);
        REQUIRE(r > 3.4);
        REQUIRE(r < 4.6);
    }

    auto grid = Grid::uniform_interior(0.0, 1.0, 255);
    auto op = second_order_generator(kappa, grid);
    const Curve zero = Curve::zeros(grid);
    for (double v : apply_generator(op, zero).values)
        REQUIRE(v == 0.0);

    // Dirichlet violation: a curve with nonzero wall values
    const Curve bad = Curve::constant(grid, 1.0);
    REQUIRE_THROWS_AS(apply_generator(op, bad), BoundaryConditionError);
}

TEST_CASE("apply_generator: translation generator on exponentials") {
    auto grid = Grid::uniform(0.0, 30.0, 4097);
    auto op = translation_generator();
    const double z = 1.2;
    const Curve h = exp_curve(grid, z);
    const Curve dh = apply_generator(op, h);
    for (std::size_t i = 0; i < grid->size(); i += 97) {
        const double x = (*grid)[i];
        REQUIRE(dh.values[i] == Catch::Approx(-z * std::exp(-z * x)).margin(1e-4));
    }
}

TEST_CASE("inner product properties: symmetry, bilinearity, Cauchy-Schwarz") {
    const double gamma = 0.15;
    auto grid = Grid::log_spaced(30.0, 257);
    auto space = SpaceDescriptor::filipovic(gamma, grid);
    RngStream rng(20240811u);
    for (int trial = 0; trial < 50; ++trial) {
        auto random_curve = [&]() {
            const double a = rng.next_normal(), b = rng.next_normal(), z1 = 0.4 + rng.next_uniform(),
                         z2 = 0.4 + rng.next_uniform();
            return Curve::from_function(
                grid, [=](double x) { return a * std::exp(-z1 * x) + b * std::exp(-z2 * x); }, 0.0);
        };
        const Curve h = random_curve(), g = random_curve(), k = random_curve();
        const double hg = inner_product(space, h, g);
        REQUIRE(hg == Catch::Approx(inner_product(space, g, h)).margin(1e-12 * (1.0 + std::abs(hg))));
        const double a = rng.next_normal(), b = rng.next_normal();
        Curve combo = a * h;
        axpy(combo, b, k);
        const double lhs = inner_product(space, combo, g);
        const double rhs = a * hg + b * inner_product(space, k, g);
        REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12 * (1.0 + std::abs(rhs))));
        REQUIRE(std::abs(hg) <= norm(space, h) * norm(space, g) * (1.0 + 1e-12) + 1e-15);
    }
}

TEST_CASE("graph norm dominates the base norm") {
    const double kappa = 0.5;
    auto grid = Grid::uniform_interior(0.0, 1.0, 511);
    auto space = SpaceDescriptor::l2_unit_interval(grid);
    auto graph = SpaceDescriptor::graph_norm(space, second_order_generator(kappa, grid));
    RngStream rng(7u);
    for (int trial = 0; trial < 20; ++trial) {
        Curve h = Curve::zeros(grid);
        for (int mode = 1; mode <= 6; ++mode)
            axpy(h, rng.next_normal(), rate_eigenfunction(grid, kappa, mode));
        REQUIRE(norm(graph, h) >= norm(space, h) * (1.0 - 1e-12));
    }
}

TEST_CASE("grid refinement consistency of weighted norms") {
    // documented tolerance schedule: doubling a 2048-point log grid moves the
    // norm of smooth exponential-family curves by less than 1e-5 relative
    const double gamma = 0.1;
    auto coarse = Grid::log_spaced(30.0, 2048);
    auto fine = Grid::log_spaced(30.0, 4096);
    auto sc = SpaceDescriptor::filipovic(gamma, coarse);
    auto sf = SpaceDescriptor::filipovic(gamma, fine);
    auto svensson = [](double x) {
        return 0.02 + (-0.03 + 0.01 * x) * std::exp(-1.1 * x) + (0.015 + 0.002 * x) * std::exp(-2.3 * x);
    };
    const double n1 = norm(sc, Curve::from_function(coarse, svensson, 0.02));
    const double n2 = norm(sf, Curve::from_function(fine, svensson, 0.02));
    REQUIRE(std::abs(n1 - n2) / n2 < 1e-5);

    const double m1 = norm(sc, exp_curve(coarse, 1.0));
    const double m2 = norm(sf, exp_curve(fine, 1.0));
    REQUIRE(std::abs(m1 - m2) / m2 < 1e-5);
}
