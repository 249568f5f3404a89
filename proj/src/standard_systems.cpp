#include "refscale/standard_systems.hpp"

#include "refscale/errors.hpp"

namespace refscale::systems {

namespace {

const Complex I{0.0, 1.0};

AngularProfile direction_component(int n, int axis) {
    // i omega_axis
    if (n == 1) return AngularProfile::circle(I, -I);
    if (axis == 0) return AngularProfile::trigonometric({{1, 0.5 * I}, {-1, 0.5 * I}});
    return AngularProfile::trigonometric({{1, 0.5}, {-1, -0.5}});
}

HomogeneousTerm term(double degree, Complex c, AngularProfile angular, Mode eta = {0, 0}) {
    HomogeneousTerm t;
    t.degree = degree;
    t.parts.push_back({{{eta, c}}, std::move(angular)});
    return t;
}

}  // namespace

ClassicalSymbol multiplication(int n, Complex c, Mode eta) {
    return ClassicalSymbol(n, {term(0.0, c, AngularProfile::constant(1.0), eta)});
}

ClassicalSymbol minus_laplacian(int n) {
    return ClassicalSymbol(n, {term(2.0, 1.0, AngularProfile::constant(1.0))});
}

ClassicalSymbol one_minus_laplacian(int n) {
    return ClassicalSymbol(n, {term(2.0, 1.0, AngularProfile::constant(1.0)),
                               term(0.0, 1.0, AngularProfile::constant(1.0))});
}

ClassicalSymbol partial(int n, int axis) {
    if (axis < 0 || axis >= n) throw InvalidSymbol("derivative axis out of range");
    return ClassicalSymbol(n, {term(1.0, 1.0, direction_component(n, axis))});
}

ClassicalSymbol shift_toeplitz() {
    HomogeneousTerm t;
    t.degree = 0.0;
    t.parts.push_back({{{Mode{1, 0}, 1.0}}, AngularProfile::circle(1.0, 0.0)});
    t.parts.push_back({{{Mode{0, 0}, 1.0}}, AngularProfile::circle(0.0, 1.0)});
    return ClassicalSymbol(1, {t});
}

PdoSystem identity_system(int n, int p) {
    PdoSystem A(n, p);
    for (int k = 0; k < p; ++k) A.set(k, k, multiplication(n, 1.0));
    return A;
}

PdoSystem cauchy_riemann() {
    PdoSystem A(2, 2);
    A.set(0, 0, partial(2, 0));
    A.set(0, 1, partial(2, 1).scaled(-1.0));
    A.set(1, 0, partial(2, 1));
    A.set(1, 1, partial(2, 0));
    return A;
}

PdoSystem degenerate_mixed() {
    PdoSystem A(2, 2);
    A.set(0, 0, minus_laplacian(2));
    A.set(0, 1, partial(2, 0));
    A.set(1, 0, partial(2, 0));
    A.set(1, 1, multiplication(2, 1.0));
    return A;
}

PdoSystem perturbed_helmholtz(double eps) {
    ClassicalSymbol pert(2, {term(1.0, eps, direction_component(2, 0), Mode{1, 0})});
    return PdoSystem::scalar(ClassicalSymbol::sum(one_minus_laplacian(2), pert));
}

}  // namespace refscale::systems
