#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "recol/fusion.hpp"

using namespace recol;

namespace {

Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
    return m;
}

}  // namespace

TEST_CASE("recol_od basics") {
    SECTION("single column: score is the normalized value") {
        const auto train = matrix_from({{0.0}, {2.0}, {4.0}});
        const auto eval = matrix_from({{1.0}, {4.0}, {6.0}});
        const auto s = recol_od(train, eval).scores;
        REQUIRE_THAT(s[0], Catch::Matchers::WithinAbs(0.25, 1e-15));
        REQUIRE_THAT(s[1], Catch::Matchers::WithinAbs(1.0, 1e-15));
        REQUIRE(s[2] > 1.0);  // beyond the train max, kept unclipped
    }
    SECTION("a row at the train max in every column scores exactly 1") {
        const auto train = matrix_from({{0, 0, 0}, {1, 2, 4}});
        const auto eval = matrix_from({{1, 2, 4}});
        REQUIRE_THAT(recol_od(train, eval).scores[0], Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
    SECTION("zero columns is an error") {
        REQUIRE_THROWS_AS(recol_od(Matrix(3, 0), Matrix(3, 0)), Error);
    }
    SECTION("constant train columns normalize to zero slope") {
        const auto train = matrix_from({{5.0}, {5.0}});
        const auto eval = matrix_from({{5.0}, {9.0}});
        const auto s = recol_od(train, eval).scores;
        REQUIRE(s[0] == 0.0);
        REQUIRE(s[1] == 4.0);  // (9-5)/1
    }
}

TEST_CASE("recol_od matches an independent summation oracle") {
    Rng rng(314);
    Matrix train(50, 6), eval(30, 6);
    for (auto& v : train.data) v = std::fabs(rng.normal());
    for (auto& v : eval.data) v = std::fabs(rng.normal());

    const auto s = recol_od(train, eval).scores;
    // oracle: explicit per-column bounds and a plain double loop
    for (std::size_t r = 0; r < eval.rows; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 6; ++c) {
            double mn = train.at(0, c), mx = train.at(0, c);
            for (std::size_t i = 1; i < train.rows; ++i) {
                mn = std::min(mn, train.at(i, c));
                mx = std::max(mx, train.at(i, c));
            }
            total += (eval.at(r, c) - mn) / (mx - mn);
        }
        REQUIRE_THAT(s[r], Catch::Matchers::WithinAbs(total / 6.0, 1e-12));
    }
}

TEST_CASE("recol_od is symmetric under column permutation") {
    Rng rng(77);
    Matrix train(40, 4), eval(20, 4);
    for (auto& v : train.data) v = rng.next_double();
    for (auto& v : eval.data) v = rng.next_double();

    Matrix train_p(40, 4), eval_p(20, 4);
    const std::size_t perm[4] = {2, 0, 3, 1};
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t c = 0; c < 4; ++c) train_p.at(r, perm[c]) = train.at(r, c);
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t c = 0; c < 4; ++c) eval_p.at(r, perm[c]) = eval.at(r, c);

    const auto a = recol_od(train, eval).scores;
    const auto b = recol_od(train_p, eval_p).scores;
    for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE_THAT(a[i], Catch::Matchers::WithinAbs(b[i], 1e-12));
}

TEST_CASE("increasing one RECol value never decreases the score") {
    Rng rng(99);
    Matrix train(30, 3), eval(10, 3);
    for (auto& v : train.data) v = rng.next_double();
    for (auto& v : eval.data) v = rng.next_double();

    const auto base = recol_od(train, eval).scores;
    for (int bump = 0; bump < 20; ++bump) {
        Matrix eval2 = eval;
        const std::size_t r = rng.next_below(10), c = rng.next_below(3);
        eval2.at(r, c) += rng.next_double() * 3.0;
        const auto s = recol_od(train, eval2).scores;
        REQUIRE(s[r] >= base[r] - 1e-15);
    }
}
