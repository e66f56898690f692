#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "hilange/mean_field.hpp"
#include "hilange/models.hpp"
#include "hilange/ops.hpp"
#include "hilange/parse.hpp"
#include "hilange/words.hpp"

using namespace hilange;

namespace {

Coeff I(const Rat& r) { return Coeff(Rat(0), r); }

BasisSet quad_pair_basis() {
    return BasisSet({"a", "d", "dd", "m"},
                    {annihilate('a'), pair_annihilate('b'), pair_create('b'), number('b')});
}

BasisSet six_pair_basis() {
    return BasisSet({"c", "cd", "n", "d", "dd", "m"},
                    {pair_annihilate('a'), pair_create('a'), number('a'), pair_annihilate('b'),
                     pair_create('b'), number('b')});
}

BasisSet fifteen_basis() {
    std::vector<std::string> labels{"c", "cd", "n", "d", "dd", "m"};
    std::vector<OperatorExpr> el{pair_annihilate('a'), pair_create('a'), number('a'),
                                 pair_annihilate('b'), pair_create('b'), number('b')};
    auto push = [&](const std::string& l, const OperatorExpr& x) {
        labels.push_back(l);
        el.push_back(x);
    };
    push("c d", pair_annihilate('a') * pair_annihilate('b'));
    push("c dd", pair_annihilate('a') * pair_create('b'));
    push("c m", pair_annihilate('a') * number('b'));
    push("cd d", pair_create('a') * pair_annihilate('b'));
    push("cd dd", pair_create('a') * pair_create('b'));
    push("cd m", pair_create('a') * number('b'));
    push("n d", number('a') * pair_annihilate('b'));
    push("n dd", number('a') * pair_create('b'));
    push("n m", number('a') * number('b'));
    return BasisSet(labels, el);
}

BasisSet anharmonic_basis() {
    return BasisSet({"c", "cd", "n", "n^2", "c^2", "cd^2", "n c", "cd n"},
                    {pair_annihilate('a'), pair_create('a'), number('a'), number('a') * number('a'),
                     pair_annihilate('a') * pair_annihilate('a'), pair_create('a') * pair_create('a'),
                     number('a') * pair_annihilate('a'), pair_create('a') * number('a')});
}

MeanFieldContext thermal_ab(const Rat& nbar, const Rat& mbar) {
    return {{'a', ModeMeans::thermal(nbar)}, {'b', ModeMeans::thermal(mbar)}};
}

}  // namespace

TEST_CASE("word expansion inverts exactly") {
    std::vector<Monomial> monos;
    for (int ra = 0; ra <= 3; ++ra)
        for (int la = 0; la <= 3; ++la)
            for (int rb = 0; rb <= 2; ++rb)
                for (int lb = 0; lb <= 2; ++lb) {
                    Monomial m;
                    if (ra || la) m.factors['a'] = {ra, la};
                    if (rb || lb) m.factors['b'] = {rb, lb};
                    monos.push_back(m);
                }
    for (const auto& m : monos) {
        OperatorExpr e(m, Coeff(1));
        CHECK(words_to_expr(to_words(e)) == e);
    }
    OperatorExpr mix = parse_operator("3/2 ad^2 a^3 b + i a bd^2 - 5 ad a ad a");
    CHECK(words_to_expr(to_words(mix)) == mix);
}

TEST_CASE("number powers collapse to single words") {
    OperatorExpr n2 = number('a') * number('a');
    WordExpr we = to_words(n2);
    REQUIRE(we.size() == 1);
    CHECK(we.begin()->first.factors.at('a') == ModeWord{0, 2});
    CHECK(we.begin()->second == Coeff(1));

    WordExpr wc = to_words(number('a') * pair_annihilate('a'));
    REQUIRE(wc.size() == 1);
    CHECK(wc.begin()->first.factors.at('a') == ModeWord{-2, 1});
    CHECK(wc.begin()->second == Coeff(Rat(1, 2)));
}

TEST_CASE("reference expectations factorize over modes") {
    MeanFieldContext ctx{{'a', ModeMeans::coherent(4)}, {'b', ModeMeans::thermal(3)}};
    WordMonomial w;
    w.factors['a'] = {-3, 0};
    CHECK(word_mean(w, ctx) == Coeff(8));
    w.factors['a'] = {2, 1};
    w.factors['b'] = {0, 2};
    CHECK(word_mean(w, ctx) == Coeff(4 * 4 * 9));
    w.factors.clear();
    w.factors['b'] = {-1, 0};
    CHECK(word_mean(w, ctx) == Coeff(0));
}

TEST_CASE("pair-coupled two-mode model rows reduce to the known matrix") {
    // H = 2 n (d + dd + m) with both reference states coherent.
    BasisSet basis = quad_pair_basis();
    MeanFieldContext ctx{{'a', ModeMeans::coherent(4)}, {'b', ModeMeans::coherent(Rat(9, 4))}};
    OperatorExpr H = (number('a') + number('a')) * (pair_annihilate('b') + pair_create('b') + number('b'));
    Rat nbar = 4, mbar(9, 4);
    Coeff abar(2);

    auto row = [&](const OperatorExpr& x) {
        return mean_field_reduce(commute(x, H) * Coeff(Rat(0), Rat(-1)), basis, ctx);
    };

    LinearCombination ra = row(annihilate('a'));
    CHECK(ra.coeffs[0] == I(-3 * mbar));
    CHECK(ra.coeffs[1] == I(-1) * abar);
    CHECK(ra.coeffs[2] == I(-1) * abar);
    CHECK(ra.coeffs[3] == Coeff(0));
    CHECK(ra.constant == Coeff(0));

    LinearCombination rd = row(pair_annihilate('b'));
    CHECK(rd.coeffs[0] == Coeff(0));
    CHECK(rd.coeffs[1] == I(-4 * nbar));
    CHECK(rd.coeffs[2] == Coeff(0));
    CHECK(rd.coeffs[3] == I(-2 * nbar));
    CHECK(rd.constant == I(-nbar));

    LinearCombination rdd = row(pair_create('b'));
    CHECK(rdd.coeffs[1] == Coeff(0));
    CHECK(rdd.coeffs[2] == I(4 * nbar));
    CHECK(rdd.coeffs[3] == I(2 * nbar));
    CHECK(rdd.constant == I(nbar));

    LinearCombination rm = row(number('b'));
    CHECK(rm.coeffs[1] == I(4 * nbar));
    CHECK(rm.coeffs[2] == I(-4 * nbar));
    CHECK(rm.coeffs[0] == Coeff(0));
    CHECK(rm.coeffs[3] == Coeff(0));
    CHECK(rm.constant == Coeff(0));
}

TEST_CASE("six-element pair basis rows reduce with thermal references") {
    // H = 4 (d + dd + m)(c + cd + n); decoupling of n m feeds the drive constant.
    BasisSet basis = six_pair_basis();
    Rat nbar(7, 5), mbar(3, 2);
    MeanFieldContext ctx = thermal_ab(nbar, mbar);
    OperatorExpr H = (pair_annihilate('b') + pair_create('b') + number('b')) *
                     (pair_annihilate('a') + pair_create('a') + number('a')) * Coeff(4);

    auto row = [&](const OperatorExpr& x) {
        return mean_field_reduce(commute(x, H) * Coeff(Rat(0), Rat(-1)), basis, ctx);
    };

    LinearCombination rc = row(pair_annihilate('a'));
    CHECK(rc.coeffs[0] == I(-8 * mbar));
    CHECK(rc.coeffs[1] == Coeff(0));
    CHECK(rc.coeffs[2] == I(-4 * mbar));
    CHECK(rc.coeffs[3] == I(-2 * (2 * nbar + 1)));
    CHECK(rc.coeffs[4] == I(-2 * (2 * nbar + 1)));
    CHECK(rc.coeffs[5] == I(-2 * (2 * nbar + 1)));
    CHECK(rc.constant == I(4 * nbar * mbar));

    LinearCombination rn = row(number('a'));
    CHECK(rn.coeffs[0] == I(8 * mbar));
    CHECK(rn.coeffs[1] == I(-8 * mbar));
    CHECK(rn.coeffs[2] == Coeff(0));
    CHECK(rn.coeffs[3] == Coeff(0));
    CHECK(rn.constant == Coeff(0));
}

TEST_CASE("fifteen-element reduction matches hand-computed closed forms") {
    BasisSet basis = fifteen_basis();
    auto idx = [&](const char* l) { return *basis.index_of(l); };
    std::vector<std::pair<Rat, Rat>> points{{Rat(1, 2), Rat(2)}, {Rat(3), Rat(1, 3)}, {Rat(5, 7), Rat(11, 4)}};
    for (const auto& [nbar, mbar] : points) {
        MeanFieldContext ctx = thermal_ab(nbar, mbar);

        // 1/8 [(2 n m + 3)(m + n + 2) + n^2 + m^2 - 4]
        OperatorExpr nm = number('a') * number('b');
        OperatorExpr line1 = (nm + nm + OperatorExpr(Coeff(3))) *
                                 (number('b') + number('a') + OperatorExpr(Coeff(2))) +
                             number('a') * number('a') + number('b') * number('b') -
                             OperatorExpr(Coeff(4));
        line1 = line1 * Coeff(Rat(1, 8));
        LinearCombination r1 = mean_field_reduce(line1, basis, ctx);
        CHECK(r1.coeffs[idx("n m")] == Coeff((nbar + mbar + 8) / 16));
        CHECK(r1.coeffs[idx("m")] == Coeff((nbar * mbar + mbar + nbar * nbar / 2 + 3) / 8));
        CHECK(r1.coeffs[idx("n")] == Coeff((nbar * mbar + nbar + mbar * mbar / 2 + 3) / 8));
        CHECK(r1.constant == Coeff(Rat(1, 4)));

        // 1/2 [m (m - 2 n) - (m + n)] c
        OperatorExpr line7 = (number('b') * (number('b') - number('a') - number('a')) -
                              (number('b') + number('a'))) *
                             pair_annihilate('a') * Coeff(Rat(1, 2));
        LinearCombination r7 = mean_field_reduce(line7, basis, ctx);
        CHECK(r7.coeffs[idx("c m")] == Coeff((mbar - 2 * nbar - 1) / 2));
        CHECK(r7.coeffs[idx("c")] == Coeff(-nbar / 2));
        CHECK(r7.constant == Coeff(0));
    }
}

TEST_CASE("cubic number products follow the pair-preserving split") {
    BasisSet basis = fifteen_basis();
    Rat nbar(2), mbar(3);
    MeanFieldContext ctx = thermal_ab(nbar, mbar);
    auto idx = [&](const char* l) { return *basis.index_of(l); };

    LinearCombination r = mean_field_reduce(number('a') * number('b') * number('b'), basis, ctx);
    CHECK(r.coeffs[idx("n m")] == Coeff(mbar / 4));
    CHECK(r.coeffs[idx("m")] == Coeff(nbar * mbar / 2));
    CHECK(r.coeffs[idx("n")] == Coeff(mbar * mbar / 4));
    CHECK(r.constant == Coeff(0));

    LinearCombination r2 = mean_field_reduce(number('a') * number('a') * number('b'), basis, ctx);
    CHECK(r2.coeffs[idx("n m")] == Coeff(nbar / 4));
    CHECK(r2.coeffs[idx("m")] == Coeff(nbar * nbar / 4));
    CHECK(r2.coeffs[idx("n")] == Coeff(nbar * mbar / 2));
}

TEST_CASE("triple pair quanta split against spanned remainders") {
    BasisSet basis = anharmonic_basis();
    MeanFieldContext ctx{{'a', ModeMeans::coherent(4)}};
    auto idx = [&](const char* l) { return *basis.index_of(l); };

    OperatorExpr c3 = pair_annihilate('a') * pair_annihilate('a') * pair_annihilate('a');
    LinearCombination r = mean_field_reduce(c3, basis, ctx);
    CHECK(r.coeffs[idx("c^2")] == Coeff(1));  // pairMean 2, half of it
    CHECK(r.coeffs[idx("c")] == Coeff(2));    // half of pairMean^2
    CHECK(r.constant == Coeff(0));
}

TEST_CASE("competing substitutions share weight through the constant") {
    BasisSet basis({"n e", "m e"}, {number('a') * annihilate('e'), number('b') * annihilate('e')});
    MeanFieldContext ctx{{'a', ModeMeans::thermal(2)}, {'b', ModeMeans::thermal(3)}, {'e', ModeMeans::coherent(4)}};

    LinearCombination r = mean_field_reduce(number('a') * number('b') * annihilate('e'), basis, ctx);
    CHECK(r.coeffs[0] == Coeff(3));
    CHECK(r.coeffs[1] == Coeff(2));
    CHECK(r.constant == Coeff(-12));

    // A lone unspanned quantum carries only its reference mean.
    LinearCombination lone = mean_field_reduce(annihilate('e'), basis, ctx);
    CHECK(lone.coeffs[0] == Coeff(0));
    CHECK(lone.coeffs[1] == Coeff(0));
    CHECK(lone.constant == Coeff(2));
}

TEST_CASE("unreachable monomials raise a named error") {
    BasisSet basis({"n"}, {number('a')});
    MeanFieldContext ctx{{'a', ModeMeans::thermal(1)}, {'b', ModeMeans::thermal(1)}};
    CHECK_THROWS_AS(mean_field_reduce(annihilate('a') * annihilate('b'), basis, ctx), ReductionError);
    CHECK_THROWS_WITH(mean_field_reduce(annihilate('a') * annihilate('b'), basis, ctx),
                      Catch::Matchers::ContainsSubstring("a:1") && Catch::Matchers::ContainsSubstring("b:1"));
}

TEST_CASE("model bases close under commutation") {
    CHECK(verify_closure(quad_pair_basis(),
                         {{'a', ModeMeans::coherent(1)}, {'b', ModeMeans::coherent(4)}})
              .closed);
    CHECK(verify_closure(six_pair_basis(), thermal_ab(Rat(1, 3), Rat(2))).closed);
    CHECK(verify_closure(fifteen_basis(), thermal_ab(Rat(1, 3), Rat(2))).closed);
    CHECK(verify_closure(anharmonic_basis(), {{'a', ModeMeans::coherent(4)}}).closed);

    BasisSet om({"a", "b", "ab", "abd", "n", "c"},
                {annihilate('a'), annihilate('b'), annihilate('a') * annihilate('b'),
                 annihilate('a') * create('b'), number('a'), pair_annihilate('a')});
    CHECK(verify_closure(om, {{'a', ModeMeans::coherent(4)}, {'b', ModeMeans::thermal(Rat(1, 2))}}).closed);
}

TEST_CASE("tabulated algebras check out through the Jacobi identity") {
    CommutatorTable rot;
    rot.labels = {"X", "Y", "Z"};
    auto lc = [](std::vector<Coeff> c, Coeff k = Coeff(0)) {
        LinearCombination l;
        l.coeffs = std::move(c);
        l.constant = k;
        return l;
    };
    rot.entries[{0, 1}] = lc({Coeff(0), Coeff(0), Coeff(1)});
    rot.entries[{1, 2}] = lc({Coeff(1), Coeff(0), Coeff(0)});
    rot.entries[{0, 2}] = lc({Coeff(0), Coeff(-1), Coeff(0)});
    CHECK(verify_closure(rot).closed);

    rot.entries[{1, 2}] = lc({Coeff(1), Coeff(0), Coeff(0)}, Coeff(0));
    rot.entries[{0, 1}] = lc({Coeff(0), Coeff(1), Coeff(0)});  // breaks the identity
    CHECK_FALSE(verify_closure(rot).closed);
}

TEST_CASE("operator text round-trips") {
    CHECK(parse_operator("ad a") == number('a'));
    CHECK(parse_operator("1/2 a^2") == pair_annihilate('a'));
    CHECK(parse_operator("a ad") == number('a') + identity());
    CHECK(parse_operator("2(ad a + 1/2)") == number('a') + number('a') + identity());
    CHECK(parse_operator("- i ad^2 b + 3/4") ==
          create('a') * create('a') * annihilate('b') * Coeff(Rat(0), Rat(-1)) + OperatorExpr(Coeff(Rat(3, 4))));

    std::vector<OperatorExpr> samples{
        number('a'),
        pair_annihilate('a') * number('b') * Coeff(Rat(-5, 3)),
        parse_operator("(1/2 - 2 i) ad a^3 + i b - 7"),
        commute(pair_annihilate('a') * pair_annihilate('a'), pair_create('a') * number('a')),
        OperatorExpr(Coeff(Rat(-2), Rat(-3))),
    };
    for (const auto& s : samples) CHECK(parse_operator(text_form(s)) == s);

    CHECK_THROWS_AS(parse_operator("d"), std::invalid_argument);
    CHECK_THROWS_AS(parse_operator("a +"), std::invalid_argument);
    CHECK_THROWS_AS(parse_operator("2/0 a"), std::invalid_argument);
    CHECK_THROWS_AS(parse_operator("a^"), std::invalid_argument);
    CHECK_THROWS_AS(parse_operator("(a"), std::invalid_argument);
}

TEST_CASE("pair-coupled photon model matches its four-operator form") {
    ModelParams p;
    p.gamma = 1;
    p.nbar = 4;
    p.mbar = Rat(9, 4);
    p.Gamma1 = 3;
    p.Gamma2 = 5;
    LinearSystem s = quad_std_1_system(p);

    REQUIRE(s.labels == std::vector<std::string>{"a", "d", "dd", "m"});
    CHECK(s.model == "quad_std_1");
    // photon row: -3i gamma mbar - Gamma1/2 on the diagonal, -i gamma abar pair couplings
    CHECK(s.M[0][0] == Coeff(Rat(-3, 2), Rat(-27, 4)));
    CHECK(s.M[0][1] == Coeff(Rat(0), Rat(-2)));
    CHECK(s.M[0][2] == Coeff(Rat(0), Rat(-2)));
    CHECK(s.M[0][3] == Coeff(0));
    CHECK(s.drive[0] == Coeff(0));
    // pair row: -4i gamma nbar diagonal, -(mbar+1/2) Gamma2/2 damping, -2i gamma nbar number coupling
    CHECK(s.M[1][0] == Coeff(0));
    CHECK(s.M[1][1] == Coeff(Rat(-55, 8), Rat(-16)));
    CHECK(s.M[1][2] == Coeff(0));
    CHECK(s.M[1][3] == Coeff(Rat(0), Rat(-8)));
    CHECK(s.drive[1] == Coeff(Rat(0), Rat(-4)));
    CHECK(s.M[2][2] == Coeff(Rat(-55, 8), Rat(16)));
    CHECK(s.M[2][3] == Coeff(Rat(0), Rat(8)));
    CHECK(s.drive[2] == Coeff(Rat(0), Rat(4)));
    // number row couples antisymmetrically to the pairs and carries no damping
    CHECK(s.M[3][1] == Coeff(Rat(0), Rat(16)));
    CHECK(s.M[3][2] == Coeff(Rat(0), Rat(-16)));
    CHECK(s.M[3][3] == Coeff(0));
    CHECK(s.drive[3] == Coeff(0));

    REQUIRE(s.ports == std::vector<std::string>{"a", "d", "dd"});
    CHECK(s.noise[0].at(0).squared() == Rat(3));
    CHECK(s.noise[1].at(1).squared() == Rat(605, 16));
    CHECK(s.noise[2].at(2).squared() == Rat(605, 16));
    CHECK(s.noise[3].empty());
}

TEST_CASE("fully pair-coupled model matches its six-operator form") {
    ModelParams p;
    p.gamma = 1;
    p.nbar = Rat(1, 3);
    p.mbar = 2;
    p.Gamma1 = 3;
    p.Gamma2 = 5;
    LinearSystem s = quad_full_1_system(p);

    REQUIRE(s.labels == std::vector<std::string>{"c", "cd", "n", "d", "dd", "m"});
    auto I = [](const Rat& r) { return Coeff(Rat(0), r); };
    // photon pair row
    CHECK(s.M[0][0] == Coeff(Rat(-5, 4), Rat(-16)));
    CHECK(s.M[0][1] == Coeff(0));
    CHECK(s.M[0][2] == I(-8));
    CHECK(s.M[0][3] == I(Rat(-10, 3)));
    CHECK(s.M[0][4] == I(Rat(-10, 3)));
    CHECK(s.M[0][5] == I(Rat(-10, 3)));
    CHECK(s.drive[0] == I(Rat(8, 3)));
    CHECK(s.M[1][1] == Coeff(Rat(-5, 4), Rat(16)));
    CHECK(s.M[1][2] == I(8));
    CHECK(s.M[1][5] == I(Rat(10, 3)));
    CHECK(s.drive[1] == I(Rat(-8, 3)));
    // photon number row
    CHECK(s.M[2][0] == I(16));
    CHECK(s.M[2][1] == I(-16));
    CHECK(s.M[2][2] == Coeff(0));
    CHECK(s.M[2][5] == Coeff(0));
    CHECK(s.drive[2] == Coeff(0));
    // phonon pair row
    CHECK(s.M[3][0] == I(-10));
    CHECK(s.M[3][1] == I(-10));
    CHECK(s.M[3][2] == I(-10));
    CHECK(s.M[3][3] == Coeff(Rat(-25, 4), Rat(-8, 3)));
    CHECK(s.M[3][4] == Coeff(0));
    CHECK(s.M[3][5] == I(Rat(-4, 3)));
    CHECK(s.drive[3] == I(Rat(8, 3)));
    // phonon number row
    CHECK(s.M[5][3] == I(Rat(8, 3)));
    CHECK(s.M[5][4] == I(Rat(-8, 3)));
    CHECK(s.drive[5] == Coeff(0));

    REQUIRE(s.ports == std::vector<std::string>{"c", "cd", "d", "dd"});
    CHECK(s.noise[0].at(0).squared() == Rat(25, 12));
    CHECK(s.noise[1].at(1).squared() == Rat(25, 12));
    CHECK(s.noise[3].at(2).squared() == Rat(125, 4));
    CHECK(s.noise[4].at(3).squared() == Rat(125, 4));
    CHECK(s.noise[2].empty());
    CHECK(s.noise[5].empty());
}

TEST_CASE("self-energy terms shift the pair diagonals") {
    ModelParams p;
    p.gamma = 1;
    p.nbar = Rat(1, 3);
    p.mbar = 2;
    p.Gamma1 = 3;
    p.Gamma2 = 5;
    LinearSystem base = quad_full_1_system(p);
    p.include_self_energy = true;
    p.Delta = 2;
    p.Omega = 1;
    LinearSystem s = quad_full_1_system(p);
    auto I = [](const Rat& r) { return Coeff(Rat(0), r); };
    CHECK(s.M[0][0] - base.M[0][0] == I(-4));
    CHECK(s.M[1][1] - base.M[1][1] == I(4));
    CHECK(s.M[2][2] == base.M[2][2]);
    CHECK(s.M[3][3] - base.M[3][3] == I(-2));
    CHECK(s.M[4][4] - base.M[4][4] == I(2));
    CHECK(s.M[5][5] == base.M[5][5]);
}

TEST_CASE("cross products extend the pair-coupled model") {
    ModelParams p;
    p.gamma = 1;
    p.nbar = Rat(1, 3);
    p.mbar = 2;
    p.Gamma1 = 3;
    p.Gamma2 = 5;
    p.order = 2;
    LinearSystem s = quad_std_2_system(p);

    REQUIRE(s.size() == 15);
    REQUIRE(s.labels == fifteen_basis().labels());
    auto I = [](const Rat& r) { return Coeff(Rat(0), r); };
    auto col = [&](const char* label) {
        for (size_t j = 0; j < s.size(); ++j)
            if (s.labels[j] == label) return j;
        FAIL("missing column");
        return size_t(0);
    };
    // photon pair row: products absorb what the six-operator model decoupled,
    // so no constant and no bare number coupling remain
    CHECK(s.M[0][0] == Coeff(Rat(-5, 4)));
    CHECK(s.M[0][2] == Coeff(0));
    CHECK(s.M[0][3] == I(-2));
    CHECK(s.M[0][5] == I(-2));
    CHECK(s.M[0][col("n d")] == I(-4));
    CHECK(s.M[0][col("n m")] == I(-4));
    CHECK(s.M[0][col("c d")] == I(-8));
    CHECK(s.M[0][col("c m")] == I(-8));
    CHECK(s.drive[0] == Coeff(0));
    // number rows couple only through products
    CHECK(s.M[2][col("c d")] == I(8));
    CHECK(s.M[2][col("cd d")] == I(-8));
    CHECK(s.M[2][col("c m")] == I(8));
    CHECK(s.M[2][3] == Coeff(0));
    CHECK(s.drive[2] == Coeff(0));
    CHECK(s.M[5][col("n d")] == I(8));
    CHECK(s.M[5][col("n dd")] == I(-8));
    CHECK(s.M[5][col("c d")] == I(8));
    CHECK(s.M[5][col("cd dd")] == I(-8));
    CHECK(s.drive[5] == Coeff(0));
    // product rows damp by the sum of both factors' channel rates
    size_t cd_row = 6;   // "c d"
    size_t nm_row = 14;  // "n m"
    REQUIRE(s.labels[cd_row] == "c d");
    REQUIRE(s.labels[nm_row] == "n m");
    CHECK(s.noise[cd_row].at(s.port_index("c")).squared() == Rat(25, 12));
    CHECK(s.noise[cd_row].at(s.port_index("d")).squared() == Rat(125, 144));
    CHECK(s.noise[nm_row].empty());
    size_t nd_row = 12;  // "n d"
    REQUIRE(s.labels[nd_row] == "n d");
    CHECK(s.noise[nd_row].count(s.port_index("c")) == 0);
    CHECK(s.noise[nd_row].at(s.port_index("d")).squared() == Rat(125, 36));
}

TEST_CASE("quartic oscillator model spans its eight-operator basis") {
    ModelParams p;
    p.omega = 3;
    p.zeta = 0;
    p.kappa = Rat(1, 2);
    p.nbar = 4;
    p.order = 2;
    LinearSystem s = anharmonic_system(p);
    REQUIRE(s.labels == anharmonic_basis().labels());

    // with no quartic term the rows rotate at their pair count and damp at
    // twice the base rate per pair
    auto diag = [](const Rat& re, const Rat& im) { return Coeff(re, im); };
    std::vector<Coeff> expect{diag(Rat(-1, 2), -6), diag(Rat(-1, 2), 6),  diag(Rat(-1, 2), 0),
                              diag(-1, 0),          diag(-1, -12),        diag(-1, 12),
                              diag(-1, -6),         diag(-1, 6)};
    for (size_t i = 0; i < s.size(); ++i) {
        CHECK(s.M[i][i] == expect[i]);
        CHECK(s.drive[i] == Coeff(0));
        for (size_t j = 0; j < s.size(); ++j)
            if (i != j) CHECK(s.M[i][j] == Coeff(0));
    }
    // every row couples to its own input line, rate doubling with pair count
    for (size_t i = 0; i < s.size(); ++i) {
        REQUIRE(s.noise[i].size() == 1);
        CHECK(s.ports[s.noise[i].begin()->first] == s.labels[i]);
    }
    CHECK(s.noise[0].begin()->second.squared() == Rat(1));
    CHECK(s.noise[2].begin()->second.squared() == Rat(1));
    CHECK(s.noise[3].begin()->second.squared() == Rat(2));
    CHECK(s.noise[6].begin()->second.squared() == Rat(2));

    // weak quartic coupling keeps the system stable
    p.zeta = Rat(1, 50);
    p.nbar = Rat(1, 4);
    LinearSystem q = anharmonic_system(p);
    CHECK(stability_margin(q) < -0.25);
}

TEST_CASE("coherent input means scale with the channel rates") {
    std::complex<double> beta{0.5, -0.25};
    auto mu = anharmonic_input_means(beta);
    double f = 2.0 * std::norm(beta);
    CHECK(mu.at("c") == beta);
    CHECK(mu.at("n") == std::complex<double>(f + 1.0));
    CHECK(mu.at("n^2") == std::complex<double>(0.0));
    CHECK(mu.at("c^2") == beta * beta);
    CHECK(mu.at("n c") == beta * beta * (f + 3.0));
    CHECK(mu.at("cd n") == std::conj(mu.at("n c")));

    // weight times bare mean reproduces the rate-scaled input dictionary:
    // sqrt(2 kappa) on single pairs, sqrt(4 kappa) on double pairs
    ModelParams p;
    p.omega = 1;
    p.zeta = Rat(1, 20);
    p.kappa = Rat(1, 2);
    p.nbar = 1;
    LinearSystem s = anharmonic_system(p);
    auto weight = [&](const char* label) {
        for (size_t i = 0; i < s.size(); ++i)
            if (s.labels[i] == label) return s.noise[i].begin()->second.value();
        FAIL("missing row");
        return 0.0;
    };
    CHECK_THAT(weight("c"), Catch::Matchers::WithinRel(std::sqrt(1.0), 1e-12));
    CHECK_THAT(weight("c^2") / weight("c"), Catch::Matchers::WithinRel(std::sqrt(2.0), 1e-12));
    CHECK_THAT(weight("n c") / weight("n"), Catch::Matchers::WithinRel(std::sqrt(2.0), 1e-12));
}

TEST_CASE("pumped oscillator rows take the stable sign convention") {
    ModelParams p;
    p.omega = 2;
    p.Gamma2 = 4;
    p.nbar = 3;
    p.g = Coeff(Rat(1), Rat(1, 2));
    LinearSystem s = amplifier_system(p);

    REQUIRE(s.labels == std::vector<std::string>{"n", "c", "cd"});
    CHECK(s.M[0][0] == Coeff(0));
    CHECK(s.M[0][1] == Coeff(Rat(1), Rat(-2)));   // -2i g
    CHECK(s.M[0][2] == Coeff(Rat(1), Rat(2)));    // +2i conj(g)
    CHECK(s.drive[0] == Coeff(0));
    CHECK(s.M[1][1] == Coeff(Rat(-7), Rat(-4)));  // -2i omega - (2 nbar + 1) Gamma2 / 4
    CHECK(s.M[1][0] == Coeff(Rat(-1, 2), Rat(-1)));
    CHECK(s.drive[1] == Coeff(Rat(-1, 4), Rat(-1, 2)));
    CHECK(s.M[2][2] == Coeff(Rat(-7), Rat(4)));
    CHECK(s.M[2][0] == Coeff(Rat(-1, 2), Rat(1)));
    CHECK(s.drive[2] == Coeff(Rat(-1, 4), Rat(1, 2)));
    CHECK(s.noise[1].at(s.port_index("c")).squared() == Rat(49));
    CHECK(s.noise[2].at(s.port_index("cd")).squared() == Rat(49));
    CHECK(s.noise[0].empty());

    // the algebra's own sign on the number row destabilizes the model
    ModelParams e = p;
    e.engine_number_sign = true;
    LinearSystem se = amplifier_system(e);
    CHECK(se.M[0][1] == -s.M[0][1]);
    CHECK(se.M[0][2] == -s.M[0][2]);
    e.omega = Rat(1, 2);
    e.g = Coeff(Rat(5, 2), Rat(5, 4));
    CHECK(stability_margin(amplifier_system(e)) > 1.0);
    ModelParams q = e;
    q.engine_number_sign = false;
    CHECK(stability_margin(amplifier_system(q)) < 1e-9);
}

TEST_CASE("quartic shift folds into the pumped oscillator rows") {
    ModelParams p;
    p.omega = 2;
    p.Gamma2 = 1;
    p.nbar = Rat(1, 2);
    p.g = Coeff(Rat(1, 2), Rat(1, 4));
    p.zeta = Rat(2, 5);
    LinearSystem s = amplifier_kerr_system(p);

    REQUIRE(s.labels == std::vector<std::string>{"n", "n^2", "c", "cd"});
    // number rows as in the plain model, squared-number bracket scaled by (6 nbar + 7)/2
    CHECK(s.M[0][2] == Coeff(0, -2) * p.g);
    CHECK(s.M[0][3] == Coeff(0, 2) * p.g.conj());
    Rat red = Rat(-5);  // -(6 nbar + 7)/2
    CHECK(s.M[1][2] == Coeff(Rat(0), red) * p.g);
    CHECK(s.M[1][3] == Coeff(Rat(0), -red) * p.g.conj());
    CHECK(s.M[1][1] == Coeff(0));
    CHECK(s.drive[1] == Coeff(0));
    // pair diagonal gains the reduced quartic rotation (6 nbar + 3) zeta / 8
    CHECK(s.M[2][2] == Coeff(Rat(-1, 2), Rat(-4) - Rat(6) * Rat(2, 5) / 8));
    CHECK(s.M[2][0] == Coeff(Rat(0), Rat(-1)) * p.g.conj());
    CHECK(s.drive[2] == Coeff(Rat(0), Rat(-1, 2)) * p.g.conj());
    CHECK(s.M[3][3] == s.M[2][2].conj());
    CHECK(s.noise[2].at(s.port_index("c")).squared() == Rat(1));
    CHECK(s.noise[3].at(s.port_index("cd")).squared() == Rat(1));
    CHECK(s.noise[0].empty());
    CHECK(s.noise[1].empty());
    CHECK(stability_margin(s) < 1e-9);
}

TEST_CASE("readout model keeps the measured number untouched") {
    ModelParams p;
    p.omega = 3;
    p.chi = Rat(1, 2);
    p.mbar = 2;
    p.Cbar = 1;
    p.Sbar = -1;
    p.kappa = 4;
    p.Gamma_m = 0;
    p.nbar = Rat(9, 4);
    LinearSystem s = qnd_system(p);

    REQUIRE(s.labels == std::vector<std::string>{"n", "m", "C", "S"});
    CHECK(s.M[0][0] == Coeff(-4));
    CHECK(s.M[1][1] == Coeff(0));
    CHECK(s.M[2][3] == Coeff(4));           // omega + chi mbar
    CHECK(s.M[2][1] == Coeff(Rat(-1, 2)));  // chi Sbar
    CHECK(s.drive[2] == Coeff(1));
    CHECK(s.M[2][2] == Coeff(-2));
    CHECK(s.M[3][2] == Coeff(-4));
    CHECK(s.M[3][1] == Coeff(Rat(-1, 2)));
    CHECK(s.drive[3] == Coeff(1));
    CHECK(s.M[3][3] == Coeff(-2));
    // probe number feeds from nothing but itself; nothing else feeds from it
    for (size_t j = 1; j < 4; ++j) CHECK(s.M[0][j] == Coeff(0));
    for (size_t i = 1; i < 4; ++i) CHECK(s.M[i][0] == Coeff(0));
    CHECK(s.noise[0].at(s.port_index("n")).squared() == Rat(36));  // 4 nbar kappa
    CHECK(s.noise[2].at(s.port_index("C")).squared() == Rat(4, 13));
    CHECK(s.noise[3].at(s.port_index("S")).squared() == Rat(4, 13));
    CHECK(s.noise[1].empty());

    CHECK(verify_closure(qnd_commutators(p.nbar)).closed);
}

TEST_CASE("optomechanical truncations agree with their cross-basis parent") {
    ModelParams p;
    p.Delta = 2;
    p.Omega = 5;
    p.kappa = 3;
    p.Gamma_m = 1;
    p.g0 = Rat(1, 2);
    p.nbar = 4;
    p.mbar = 3;
    p.alpha = Coeff(6);
    p.order = 2;
    LinearSystem s = om_std_2_system(p);

    REQUIRE(s.labels == std::vector<std::string>{"a", "b", "ab", "abd", "n", "c"});
    auto I = [](const Rat& r) { return Coeff(Rat(0), r); };
    CHECK(s.M[0][0] == Coeff(Rat(-3, 2), Rat(-2)));
    CHECK(s.M[0][2] == I(Rat(1, 2)));
    CHECK(s.M[0][3] == I(Rat(1, 2)));
    CHECK(s.M[1][1] == Coeff(Rat(-1, 2), Rat(5)));
    CHECK(s.M[1][4] == I(Rat(1, 2)));
    // cross rows: L = g0 nbar + g0 (mbar + 1), pair rates add
    CHECK(s.M[2][0] == I(4));
    CHECK(s.M[2][2] == Coeff(Rat(-2), Rat(3)));   // i(Omega - Delta) - (kappa + Gamma)/2
    CHECK(s.M[2][3] == I(Rat(1, 2)));
    CHECK(s.M[3][0] == I(4));
    CHECK(s.M[3][2] == I(Rat(1, 2)));
    CHECK(s.M[3][3] == Coeff(Rat(-2), Rat(-7)));  // -i(Omega + Delta) - (kappa + Gamma)/2
    CHECK(s.M[4][4] == Coeff(-3));
    CHECK(s.M[5][2] == I(2));                     // 2 F = 2 g0 sqrt(nbar)
    CHECK(s.M[5][3] == I(2));
    CHECK(s.M[5][5] == Coeff(Rat(-3), Rat(-4)));  // -2i Delta - kappa
    for (size_t i = 0; i < s.size(); ++i) CHECK(s.drive[i] == Coeff(0));
    // noise squares: photon and phonon lines, flux-weighted cross inputs,
    // photon-number and photon-pair composite lines
    CHECK(s.noise[0].at(s.port_index("a")).squared() == Rat(3));
    CHECK(s.noise[1].at(s.port_index("b")).squared() == Rat(1));
    CHECK(s.noise[2].at(s.port_index("a")).squared() == Rat(9));   // kappa mbar
    CHECK(s.noise[2].at(s.port_index("b")).squared() == Rat(6));   // Gamma alpha
    CHECK(s.noise[3].at(s.port_index("a")).squared() == Rat(9));
    CHECK(s.noise[3].at(s.port_index("b")).squared() == Rat(6));
    CHECK(s.noise[4].at(s.port_index("a")).squared() == Rat(48));  // 4 nbar kappa
    CHECK(s.noise[5].at(s.port_index("a")).squared() == Rat(96));
    CHECK(s.noise[5].at(s.port_index("a2")).squared() == Rat(24));

    // folding the cross basis back recovers the three-operator model exactly
    p.order = 1;
    LinearSystem first = om_std_1a_system(p);
    LinearSystem folded = first_order_truncation(s, p.nbar);
    REQUIRE(folded.labels == first.labels);
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = 0; j < 3; ++j) CHECK(folded.M[i][j] == first.M[i][j]);
        CHECK(folded.drive[i] == first.drive[i]);
        REQUIRE(folded.noise[i].size() == first.noise[i].size());
        for (const auto& [k, w] : first.noise[i])
            CHECK(folded.noise[i].at(k).squared() == w.squared());
    }
    CHECK(first.M[0][1] == I(1));  // i F
    CHECK(first.drive[1] == I(2)); // i G
    CHECK(first.drive[2] == I(-2));

    // ultracold drops the phonon shift from the cross coupling
    ModelParams u = p;
    u.order = 2;
    u.ultracold = true;
    CHECK(om_std_2_system(u).M[2][0] == I(2));

    // the alternative fold feeds the pairs from the photon instead
    LinearSystem alt = om_std_1b_system(p);
    CHECK(alt.M[1][0] == I(1));
    CHECK(alt.M[2][1] == I(1));
    CHECK(alt.drive[1] == Coeff(0));
    CHECK(alt.drive[2] == Coeff(0));
    CHECK(alt.M[0][1] == I(1));
}

TEST_CASE("diode chain embeds lower orders and decouples without leakage") {
    ModelParams p;
    p.mu = 2;
    p.kappa = 3;
    p.tau = 1;
    LinearSystem s4 = diode_system(4, p);
    REQUIRE(s4.labels == std::vector<std::string>{"u", "u^2", "u^3", "u^4"});
    CHECK(s4.M[0][0] == Coeff(-5));
    CHECK(s4.M[0][1] == Coeff(Rat(-3, 2)));
    CHECK(s4.M[0][2] == Coeff(Rat(-1, 2)));
    CHECK(s4.M[0][3] == Coeff(Rat(-1, 8)));
    CHECK(s4.M[1][1] == Coeff(-10));
    CHECK(s4.M[1][2] == Coeff(-3));
    CHECK(s4.M[1][3] == Coeff(-1));
    CHECK(s4.M[2][2] == Coeff(-15));
    CHECK(s4.M[2][3] == Coeff(Rat(-9, 2)));
    CHECK(s4.M[3][3] == Coeff(-20));
    CHECK(s4.M[1][0] == Coeff(0));

    // every lower order is the leading block of a higher one
    LinearSystem s2 = diode_system(2, p);
    for (size_t i = 0; i < 2; ++i)
        for (size_t j = 0; j < 2; ++j) CHECK(s2.M[i][j] == s4.M[i][j]);

    // zero junction coupling leaves independent linear relaxations
    ModelParams lin = p;
    lin.kappa = 0;
    LinearSystem d = diode_system(3, lin);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j)
            CHECK(d.M[i][j] == (i == j ? Coeff(-2 * Rat(i + 1)) : Coeff(0)));

    // operating point at zero drive feeds only the first moment
    REQUIRE(s4.ports == std::vector<std::string>{"v", "w"});
    CHECK(s4.noise[0].at(0).squared() == Rat(1));
    CHECK(s4.noise[0].at(1).squared() == Rat(1));
    CHECK(s4.noise[1].empty());
    CHECK(s4.noise[3].empty());

    // a linear operating point sets the weights to the moment slopes
    ModelParams biased = lin;
    biased.vbar = 3;
    LinearSystem b = diode_system(3, biased);
    CHECK(b.noise[0].at(0).squared() == Rat(1));       // (1 * ubar^0 / tau)^2, ubar = 3/2
    CHECK(b.noise[1].at(0).squared() == Rat(9));       // (2 ubar / tau)^2
    CHECK(b.noise[2].at(0).squared() == Rat(729, 16)); // (3 ubar^2 / tau)^2

    // numeric view agrees with the exact matrix
    DiodeChain chain{4, 3.0, 2.0, 1.0};
    std::vector<double> u{0.3, -0.1, 0.05, 0.2}, out;
    chain.derivative(u, 0.0, out);
    Eigen::MatrixXcd M = s4.matrix();
    for (size_t i = 0; i < 4; ++i) {
        double expect = 0;
        for (size_t j = 0; j < 4; ++j) expect += M(i, j).real() * u[j];
        CHECK_THAT(out[i], Catch::Matchers::WithinAbs(expect, 1e-12));
    }
}

TEST_CASE("cubic photon number routes agree") {
    ModelParams p;
    p.g0 = Rat(1, 10);
    p.kappa = Rat(3, 10);
    p.Gamma_m = Rat(1, 100);
    p.Omega = 1;
    p.Delta = Rat(1, 2);
    p.mbar = Rat(1, 2);
    p.alpha = Coeff(2);
    CubicSolution c = photon_number_cubic(p);
    std::array<double, 3> comp{c.companion[0].nbar, c.companion[1].nbar, c.companion[2].nbar};
    std::array<double, 3> closed = c.closed;
    std::sort(comp.begin(), comp.end());
    std::sort(closed.begin(), closed.end());
    for (int k = 0; k < 3; ++k)
        CHECK_THAT(closed[k], Catch::Matchers::WithinRel(comp[k], 1e-8));
    CHECK_FALSE(c.degenerate);

    // no drive factorizes the roots
    p.alpha = Coeff(0);
    CubicSolution z = photon_number_cubic(p);
    CHECK(z.degenerate);
    CHECK(z.closed[0] == 0.0);
    CHECK_THAT(z.closed[1], Catch::Matchers::WithinRel(z.closed[2], 1e-12));
}

TEST_CASE("model ids build their systems") {
    ModelParams p;
    p.kappa = 1;
    CHECK(build_model("diode(3)", p).size() == 3);
    p.diode_order = 5;
    CHECK(build_model("diode", p).size() == 5);
    CHECK_THROWS_AS(build_model("unknown", p), std::invalid_argument);
    ModelParams bad;
    bad.order = 2;
    bad.Gamma1 = 1;
    CHECK_THROWS_AS(build_model("quad_std_1", bad), std::invalid_argument);
    CHECK_THROWS_AS(diode_system(0, p), std::invalid_argument);

    CHECK_THAT(thermal_occupation(1.0, hbar_SI / (boltzmann_SI * std::log(2.0))),
               Catch::Matchers::WithinRel(1.0, 1e-12));
    CHECK(thermal_occupation(1.0, 0.0) == 0.0);
    CHECK_THROWS_AS(thermal_occupation(0.0, 1.0), std::invalid_argument);
    CHECK_THAT(thermal_occupation(1.0, hbar_SI / (boltzmann_SI * 0.01)),
               Catch::Matchers::WithinRel(1.0 / std::expm1(0.01), 1e-12));
    CHECK_THAT(photon_number_linear({2.0, 1.0}, 10.0), Catch::Matchers::WithinRel(2.0, 1e-12));
    CHECK_THROWS_AS(photon_number_linear({1.0, 0.0}, 0.0), std::invalid_argument);
}
