#include <sstream>

#include "doctest.h"
#include "glt/error.hpp"
#include "glt/interpretation.hpp"

using namespace glt;

TEST_CASE("subject heatmap from two patches")
{
    const std::vector<PatchError> errors{{{0, 0, 2}, 1.0}, {{1, 1, 2}, 2.0}, {{2, 2, 2}, 9.0}};
    auto map = subject_heatmap(4, 4, errors, 2);
    CHECK(map.at(1, 1) == 1.0); // overlap, normalised maximum
    CHECK(map.at(0, 0) == 0.5);
    CHECK(map.at(2, 2) == 0.5);
    CHECK(map.at(3, 3) == 0.0);
    CHECK(map.max() == 1.0);
}

TEST_CASE("lowest-error selection is per size with row/column tie-break")
{
    const std::vector<PatchError> errors{{{2, 0, 2}, 1.0}, {{0, 3, 2}, 1.0}, {{0, 1, 2}, 1.0},
                                         {{0, 0, 4}, 5.0}, {{1, 0, 4}, 0.5}};
    auto best = lowest_error_per_size(errors, 2);
    REQUIRE(best.size() == 4);
    CHECK(best[0] == PatchSpec{0, 1, 2});
    CHECK(best[1] == PatchSpec{0, 3, 2});
    CHECK(best[2] == PatchSpec{1, 0, 4});
    CHECK(best[3] == PatchSpec{0, 0, 4});
    const std::size_t only4[] = {4};
    CHECK(lowest_error_per_size(errors, 5, only4).size() == 2);
    CHECK(lowest_error_pooled(errors, 1, {}).front() == PatchSpec{1, 0, 4});
}

TEST_CASE("coverage counts patches and rejects outside patches")
{
    const std::vector<PatchSpec> patches{{0, 0, 3}, {1, 1, 3}};
    auto c = coverage(4, 5, patches);
    CHECK(c.at(1, 1) == 2.0);
    CHECK(c.at(0, 3) == 0.0);
    CHECK(c.mass(0, 0, 4, 5) == 18.0);
    const std::vector<PatchSpec> bad{{2, 0, 3}};
    CHECK_THROWS_AS(coverage(4, 5, bad), ContractError);
    CHECK(normalized(Heatmap{2, 2, {0, 0, 0, 0}}).max() == 0.0);
}

TEST_CASE("group heatmap averages subjects inside the bin only")
{
    const std::size_t sizes[] = {2};
    std::vector<SubjectPatchErrors> subjects{
        {12.0, {{{0, 0, 2}, 0.1}, {{2, 2, 2}, 4.0}}},
        {14.0, {{{0, 0, 2}, 3.0}, {{2, 2, 2}, 1.0}}},
        {30.0, {{{2, 0, 2}, 0.0}}},
    };
    auto g = group_heatmap(4, 4, subjects, 10, 15, 1, sizes);
    REQUIRE(g.has_value());
    CHECK(g->at(0, 0) == 1.0);
    CHECK(g->at(3, 3) == 1.0);
    CHECK(g->at(2, 0) == 0.0);
    // Upper bound is exclusive.
    CHECK_FALSE(group_heatmap(4, 4, subjects, 15, 30, 1, sizes).has_value());

    // Reordering the subjects leaves the map unchanged.
    std::vector<SubjectPatchErrors> reversed(subjects.rbegin(), subjects.rend());
    CHECK(group_heatmap(4, 4, reversed, 10, 15, 1, sizes)->grid == g->grid);
}

TEST_CASE("sigma distribution bins by integer year and smooths over present years")
{
    const std::vector<std::pair<double, double>> rows{{20.2, 1.0}, {20.9, 3.0}, {21.5, 4.0}, {30.0, 10.0}};
    auto d = sigma_distribution(rows, 5);
    REQUIRE(d.size() == 3);
    CHECK(d[0].age == 20);
    CHECK(d[0].mean_sigma == 2.0);
    CHECK(d[0].count == 2);
    CHECK(d[0].smoothed == 3.0);
    CHECK(d[2].smoothed == 10.0);
    std::ostringstream os;
    write_sigma_csv(os, d);
    CHECK(os.str().rfind("age,mean_sigma,smoothed,count\n20,2,3,2\n", 0) == 0);
}

TEST_CASE("pgm output")
{
    std::ostringstream os;
    write_pgm(os, Heatmap{1, 3, {0.0, 0.5, 1.0}});
    const auto s = os.str();
    CHECK(s.substr(0, 11) == "P5\n3 1\n255\n");
    REQUIRE(s.size() == 14);
    CHECK(static_cast<unsigned char>(s[11]) == 0);
    CHECK(static_cast<unsigned char>(s[12]) == 128);
    CHECK(static_cast<unsigned char>(s[13]) == 255);
}
