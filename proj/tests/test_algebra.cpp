#include <catch2/catch_amalgamated.hpp>

#include "hilange/fock.hpp"
#include "hilange/ops.hpp"

using namespace hilange;

namespace {

OperatorExpr mono(std::map<Mode, ModePowers> f, Coeff c) { return {Monomial{std::move(f)}, std::move(c)}; }

const Coeff half{Rat(1, 2)};
const Coeff threehalf{Rat(3, 2)};

}  // namespace

TEST_CASE("elementary commutators") {
    auto a = annihilate('a'), ad = create('a'), n = number('a');
    CHECK(commute(a, ad) == identity());
    CHECK(commute(a, n) == a);
    CHECK(commute(ad, n) == -ad);
    CHECK(commute(a, a) == OperatorExpr{});
}

TEST_CASE("normal ordering of a a ad ad") {
    auto a = annihilate('a');
    auto prod = a * a * create('a') * create('a');
    OperatorExpr expect = mono({{'a', {2, 2}}}, Coeff(1)) + mono({{'a', {1, 1}}}, Coeff(4)) + identity() * Coeff(2);
    CHECK(prod == expect);
}

TEST_CASE("pair operator commutators, single mode") {
    auto c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    CHECK(commute(c, cd) == n + identity() * half);
    CHECK(commute(c, n) == Coeff(2) * c);
    CHECK(commute(cd, n) == Coeff(-2) * cd);
    CHECK(commute(c, create('a')) == annihilate('a'));
}

TEST_CASE("pair operator commutators, second mode") {
    auto d = pair_annihilate('b'), dd = pair_create('b'), m = number('b');
    CHECK(commute(d, dd) == m + identity() * half);
    CHECK(commute(d, m) == Coeff(2) * d);
    CHECK(commute(dd, m) == Coeff(-2) * dd);
    CHECK(commute(d, create('b')) == annihilate('b'));
}

TEST_CASE("cross-mode ladder commutators") {
    auto a = annihilate('a'), b = annihilate('b'), n = number('a');
    auto ab = a * b, abd = a * adjoint(b);
    CHECK(commute(a, n) == a);
    CHECK(commute(abd, b) == -a);
    CHECK(commute(ab, n) == ab);
    CHECK(commute(abd, n) == abd);
    CHECK(commute(ab, abd) == Coeff(2) * pair_annihilate('a'));
    CHECK(commute(pair_annihilate('a'), n) == Coeff(2) * pair_annihilate('a'));
    CHECK(commute(ab, b) == OperatorExpr{});
    CHECK(commute(ab, pair_annihilate('a')) == OperatorExpr{});
}

TEST_CASE("quartic pair commutators") {
    auto c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    auto c2 = c * c, cd2 = cd * cd;

    // [c^2, cd^2] = n^3 + 3/2 n^2 + 7/2 n + 3/2
    OperatorExpr expect = pow(n, 3) + threehalf * pow(n, 2) + Coeff(Rat(7, 2)) * n + identity() * threehalf;
    CHECK(commute(c2, cd2) == expect);

    CHECK(commute(n, c2) == Coeff(-4) * c2);
    CHECK(commute(c2, cd) == Coeff(2) * (n * c) + Coeff(3) * c);
    CHECK(commute(c, cd * n) == threehalf * pow(n, 2));
    CHECK(commute(pow(n, 2), c) == Coeff(-4) * (n * c) - Coeff(4) * c);
}

TEST_CASE("two-mode quartic commutators") {
    auto c = pair_annihilate('a'), n = number('a');
    auto d = pair_annihilate('b'), dd = pair_create('b'), m = number('b');

    // [c d+, n m] = 2 (m - n - 2) c d+
    CHECK(commute(c * dd, n * m) == Coeff(2) * ((m - n - identity() * Coeff(2)) * (c * dd)));
    // [c m, n d+] = 2 (m + n) c d+
    CHECK(commute(c * m, n * dd) == Coeff(2) * ((m + n) * (c * dd)));
    // [c m, n d] = 2 (m - n) c d
    CHECK(commute(c * m, n * d) == Coeff(2) * ((m - n) * (c * d)));
    // [c d, n m] = 2 (n + m + 2) c d
    CHECK(commute(c * d, n * m) == Coeff(2) * ((n + m + identity() * Coeff(2)) * (c * d)));
}

TEST_CASE("commutator antisymmetry and adjoint compatibility") {
    std::vector<OperatorExpr> set = {
        annihilate('a'), create('a'), number('a'), pair_annihilate('a'),
        pair_create('a') * number('a'), annihilate('a') * annihilate('b'),
        number('a') * number('b'), pair_create('b'),
    };
    for (const auto& A : set)
        for (const auto& B : set) {
            CHECK(commute(A, B) == -commute(B, A));
            CHECK(adjoint(commute(A, B)) == commute(adjoint(B), adjoint(A)));
        }
}

TEST_CASE("Jacobi identity") {
    std::vector<OperatorExpr> set = {
        pair_annihilate('a'), pair_create('a'), number('a') * pair_annihilate('a'),
        annihilate('a') * annihilate('b'), number('a') * number('b'),
    };
    for (const auto& A : set)
        for (const auto& B : set)
            for (const auto& C : set) {
                auto sum = commute(A, commute(B, C)) + commute(B, commute(C, A)) + commute(C, commute(A, B));
                CHECK(sum == OperatorExpr{});
            }
}

TEST_CASE("adjoint is an involution") {
    auto e = Coeff(Rat(0), Rat(3)) * (number('a') * pair_annihilate('b')) + Coeff(2) * create('a');
    CHECK(adjoint(adjoint(e)) == e);
}

TEST_CASE("number-state oracle confirms symbolic products") {
    FockSpace f1({{'a', 14}});
    auto c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    CHECK(f1.agree(commute(c, cd), n + identity() * half));
    CHECK(f1.agree(commute(c * c, cd * cd),
                   pow(n, 3) + threehalf * pow(n, 2) + Coeff(Rat(7, 2)) * n + identity() * threehalf));
    CHECK_FALSE(f1.agree(pow(n, 2), pow(n, 2) + identity()));

    FockSpace f2({{'a', 9}, {'b', 9}});
    auto d = pair_annihilate('b'), m = number('b');
    CHECK(f2.agree(commute(annihilate('a') * annihilate('b'), annihilate('a') * create('b')),
                   Coeff(2) * pair_annihilate('a')));
    CHECK(f2.agree(commute(c * m, n * d), Coeff(2) * ((m - n) * (c * d))));
}

TEST_CASE("oracle matrix spot values") {
    FockSpace f({{'a', 6}});
    auto M = f.matrix(number('a'));
    for (int j = 0; j < 6; ++j) CHECK(M(j, j).real() == Catch::Approx(double(j)));
    auto A = f.matrix(annihilate('a'));
    CHECK(A(1, 2).real() == Catch::Approx(std::sqrt(2.0)));
    CHECK(A(3, 4).real() == Catch::Approx(2.0));
}

TEST_CASE("antinormal ordering identities") {
    auto n = number('a');
    // n = a ad - 1
    auto t1 = antinormal_terms(n);
    REQUIRE(t1.size() == 2);
    CHECK(t1[0].first.is_identity());
    CHECK(t1[0].second == Coeff(-1));
    CHECK(t1[1].first == Monomial{{{'a', {1, 1}}}});
    CHECK(t1[1].second == Coeff(1));

    // n^2 = a^2 ad^2 - 3 a ad + 1
    auto t2 = antinormal_terms(pow(n, 2));
    REQUIRE(t2.size() == 3);
    CHECK(t2[0].second == Coeff(1));
    CHECK(t2[1].first == Monomial{{{'a', {1, 1}}}});
    CHECK(t2[1].second == Coeff(-3));
    CHECK(t2[2].first == Monomial{{{'a', {2, 2}}}});
    CHECK(t2[2].second == Coeff(1));

    // n c = (1/2) a^3 ad - (3/2) a^2
    auto t3 = antinormal_terms(n * pair_annihilate('a'));
    REQUIRE(t3.size() == 2);
    CHECK(t3[0].first == Monomial{{{'a', {0, 2}}}});
    CHECK(t3[0].second == -threehalf);
    CHECK(t3[1].first == Monomial{{{'a', {1, 3}}}});
    CHECK(t3[1].second == half);

    // cd n = (1/2) a ad^3 - (3/2) ad^2
    auto t4 = antinormal_terms(pair_create('a') * n);
    REQUIRE(t4.size() == 2);
    CHECK(t4[0].first == Monomial{{{'a', {2, 0}}}});
    CHECK(t4[0].second == -threehalf);
    CHECK(t4[1].first == Monomial{{{'a', {3, 1}}}});
    CHECK(t4[1].second == half);
}

TEST_CASE("phase-space moments from antinormal form") {
    std::map<Mode, Coeff> alpha{{'a', Coeff(2)}};
    // <n>: |alpha|^2 - 1 = 3
    CHECK(phase_space_moment(number('a'), alpha) == Coeff(3));
    // <n^2>: |a|^4 - 3|a|^2 + 1 = 16 - 12 + 1 = 5
    CHECK(phase_space_moment(pow(number('a'), 2), alpha) == Coeff(5));
    // <n c>: a^3 a*/2 - 3 a^2/2 = 8 - 6 = 2 (alpha real)
    CHECK(phase_space_moment(number('a') * pair_annihilate('a'), alpha) == Coeff(2));
}
