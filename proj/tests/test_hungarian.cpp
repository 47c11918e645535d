#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "hetnet/hungarian.hpp"
#include "support.hpp"

using namespace hetnet;
using hetnet::test::urand;

namespace {

double brute_force(const Matrix& m) {
    std::vector<int> perm(m.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double c = 0;
        for (size_t r = 0; r < m.size(); ++r) c += m[r][perm[r]];
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Matrix random_matrix(Rng& rng, int n, bool integer) {
    Matrix m(n, std::vector<double>(n));
    for (auto& row : m)
        for (auto& x : row) x = integer ? uniform_int(rng, 20) : urand(rng, -5, 50);
    return m;
}

}  // namespace

TEST_CASE("solve_square examples") {
    Matrix diag = {{0, 9, 9}, {9, 0, 9}, {9, 9, 0}};
    auto a = solve_square(diag);
    CHECK(a.col_of_row == std::vector<int>{0, 1, 2});
    CHECK(a.cost == 0);
    auto b = solve_square({{1, 2}, {2, 4}});
    CHECK(b.col_of_row == std::vector<int>{1, 0});
    CHECK(b.cost == 4);
    CHECK_THROWS_AS(solve_square({{1, 2}}), StructuralError);
    CHECK(solve_square({}).cost == 0);
}

TEST_CASE("solve_square matches permutation brute force") {
    Rng rng(1);
    for (int k = 0; k < 300; ++k) {
        int n = 1 + k % 7;
        auto m = random_matrix(rng, n, k % 2 == 0);
        auto a = solve_square(m);
        std::vector<int> seen = a.col_of_row;
        std::sort(seen.begin(), seen.end());
        for (int i = 0; i < n; ++i) CHECK(seen[i] == i);
        CHECK(a.cost == doctest::Approx(brute_force(m)).epsilon(1e-12));
    }
}

TEST_CASE("assignment value shifts exactly with row and column constants") {
    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        int n = 2 + k % 5;
        auto m = random_matrix(rng, n, false);
        double base = solve_square(m).cost;
        auto shifted = m;
        int r = uniform_int(rng, n), c = uniform_int(rng, n);
        double a = urand(rng, -10, 10), b = urand(rng, -10, 10);
        for (int j = 0; j < n; ++j) shifted[r][j] += a;
        for (int i = 0; i < n; ++i) shifted[i][c] += b;
        CHECK(solve_square(shifted).cost == doctest::Approx(base + a + b).epsilon(1e-9));
    }
}

TEST_CASE("rectangular problems pad with virtual rows or columns") {
    auto wide = solve_rectangular({{5, 1, 7}});
    CHECK(wide.col_of_row == std::vector<int>{1});
    CHECK(wide.cost == 1);
    auto tall = solve_rectangular({{3}, {1}, {2}});
    CHECK(tall.cost == 1);
    CHECK(tall.col_of_row == std::vector<int>{-1, 0, -1});
}

TEST_CASE("associate_users examples") {
    CHECK(associate_users({{4.0}}, {1}) == std::vector<int>{0});

    // Two BSs with one slot each; the third user goes virtual.
    Matrix P1 = {{1, 5, 2}, {6, 1, 9}};
    auto bs = associate_users(P1, {1, 1});
    CHECK(bs == std::vector<int>{0, 1, -1});

    // Unreachable everywhere stays unserved.
    CHECK(associate_users({{kUnreachable}}, {1}) == std::vector<int>{-1});

    Matrix eq = {{1, 1, 1}, {1, 1, 1}};
    auto any = associate_users(eq, {2, 1});
    int served = 0;
    for (int b : any) served += b >= 0;
    CHECK(served == 3);
}

TEST_CASE("associate_users matches enumeration under slot limits") {
    Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        Matrix P1(2, std::vector<double>(3));
        for (auto& row : P1)
            for (auto& x : row) x = urand(rng, 0, 10);
        std::vector<int> slots = {1 + uniform_int(rng, 3), 1 + uniform_int(rng, 3)};
        // Cheapest association that serves min(U, total slots) users.
        int need = std::min(3, slots[0] + slots[1]);
        double best = 1e300;
        for (int mask = 0; mask < 27; ++mask) {
            int code = mask, used[2] = {0, 0}, count = 0;
            double c = 0;
            for (int u = 0; u < 3; ++u, code /= 3) {
                int b = code % 3 - 1;
                if (b < 0) continue;
                ++used[b];
                ++count;
                c += P1[b][u];
            }
            if (used[0] <= slots[0] && used[1] <= slots[1] && count == need) best = std::min(best, c);
        }
        auto bs = associate_users(P1, slots);
        double got = 0;
        int count = 0, used[2] = {0, 0};
        for (int u = 0; u < 3; ++u)
            if (bs[u] >= 0) {
                got += P1[bs[u]][u];
                ++count;
                ++used[bs[u]];
            }
        CHECK(count == need);
        CHECK(used[0] <= slots[0]);
        CHECK(used[1] <= slots[1]);
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("allocate_subcarriers without repair") {
    Matrix P2 = {{1, 5, 5}, {5, 1, 5}};
    auto res = allocate_subcarriers(P2, 2, [](int, const std::vector<int>&) { return true; });
    CHECK(res.subs[0] == std::vector<int>{0});
    CHECK(res.subs[1] == std::vector<int>{1});
    CHECK(res.repair_rounds == 0);
    CHECK(res.flagged.empty());
}

TEST_CASE("allocate_subcarriers respects the occupancy cap") {
    Matrix P2 = {{1, 2}, {2, 1}, {1, 1}};
    auto res = allocate_subcarriers(P2, 2, [](int, const std::vector<int>&) { return true; });
    std::vector<int> load(2, 0);
    for (const auto& s : res.subs) {
        CHECK(s.size() == 1);
        for (int n : s) ++load[n];
    }
    CHECK(std::max(load[0], load[1]) == 2);
    CHECK(res.flagged.empty());

    Matrix crowded = {{1, 2}, {2, 1}, {1, 1}, {1, 1}, {1, 1}};
    auto cr = allocate_subcarriers(crowded, 2, [](int, const std::vector<int>&) { return true; });
    std::vector<int> l2(2, 0);
    for (const auto& s : cr.subs)
        for (int n : s) ++l2[n];
    CHECK(l2[0] <= 2);
    CHECK(l2[1] <= 2);
    CHECK(cr.flagged.size() == 1);
}

TEST_CASE("repair gives a starved user the extra subcarrier it needs") {
    // Per-subcarrier rates; user 0 needs 2 units, user 1 needs 1.
    std::vector<std::vector<double>> r = {{1.0, 0.2, 1.0}, {0.5, 1.0, 0.5}};
    std::vector<double> need = {2.0, 1.0};
    auto ok = [&](int u, const std::vector<int>& s) {
        double t = 0;
        for (int n : s) t += r[u][n];
        return t >= need[u] - 1e-12;
    };
    Matrix P2 = {{1, 3, 2}, {3, 1, 3}};
    const int l_max = 2;
    auto res = allocate_subcarriers(P2, l_max, ok);
    CHECK(res.repair_rounds >= 1);
    CHECK(res.subs[0] == std::vector<int>{0, 2});
    CHECK(res.flagged.empty());
    for (int u = 0; u < 2; ++u) CHECK(ok(u, res.subs[u]));

    // Exhaustive check: a feasible tau exists within the occupancy cap.
    bool exists = false;
    for (int m0 = 1; m0 < 8; ++m0)
        for (int m1 = 1; m1 < 8; ++m1) {
            std::vector<int> s0, s1;
            bool cap = true;
            for (int n = 0; n < 3; ++n) {
                if (m0 >> n & 1) s0.push_back(n);
                if (m1 >> n & 1) s1.push_back(n);
                cap = cap && ((m0 >> n & 1) + (m1 >> n & 1)) <= l_max;
            }
            if (cap && ok(0, s0) && ok(1, s1)) exists = true;
        }
    CHECK(exists);
}

TEST_CASE("min_power_for_rate") {
    CHECK(min_power_for_rate(0, 1, 1, 1, 10) == 0);
    CHECK(min_power_for_rate(1, 1, 2, 3, 10) == doctest::Approx(1.5));
    CHECK(min_power_for_rate(10, 1, 1, 1, 10) == kUnreachable);
}
