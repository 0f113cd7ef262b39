#include "gaimr/gai_model.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_instances.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gaimr;
using fixture::make_structure;

namespace {

std::map<std::size_t, long long> as_map(std::span<const CoefficientTerm> terms) {
    std::map<std::size_t, long long> out;
    for (const auto& t : terms) out[t.index] += t.coefficient;
    return out;
}

} // namespace

TEST(ConditioningSets, ChainAndDisjoint) {
    auto s = make_structure({2, 2, 2}, {{0, 1}, {1, 2}});
    EXPECT_EQ(s->conditioning_set(0), (AttributeSet{2}));
    EXPECT_EQ(s->conditioning_set(1), (AttributeSet{0}));

    auto d = make_structure({2, 2}, {{0}, {1}});
    EXPECT_TRUE(d->conditioning_set(0).empty());
    EXPECT_TRUE(d->conditioning_set(1).empty());

    auto c = make_structure({2, 2, 2, 2}, {{0, 1}, {1, 2}, {2, 3}});
    EXPECT_EQ(c->conditioning_set(1), (AttributeSet{0, 3}));
}

TEST(ConditioningSets, UncoveredAttributeIsSchemaError) {
    auto schema = fixture::make_schema({2, 2, 2});
    auto factors = fixture::make_factors(schema, {{0, 1}});
    EXPECT_THROW(build_conditioning_sets(schema, factors), SchemaError);
    EXPECT_THROW(GaiStructure(schema, factors), SchemaError);
}

TEST(Structure, RejectsIdenticalTopBottom) {
    auto schema = fixture::make_schema({2, 2});
    std::vector<Factor> factors{{{0}, 1, 1}, {{1}, 1, 0}};
    EXPECT_THROW(GaiStructure(schema, factors), SchemaError);
}

TEST(Structure, LocalIndexIsMixedRadixFirstAttributeMostSignificant) {
    auto s = make_structure({2, 3, 4}, {{0, 1, 2}});
    EXPECT_EQ(s->local_size(0), 24u);
    EXPECT_EQ(s->local_index(0, {1, 2, 3}), 1u * 12 + 2u * 4 + 3u);
    EXPECT_EQ(s->local_levels(0, 23), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(s->expand(0, 5), (Outcome{0, 1, 1}));
    EXPECT_EQ(s->parameter_count(), 24u + 2u);
}

TEST(Coefficients, ChainSecondFactor) {
    // factors {a0,a1},{a1,a2}; factor 1 input (x1=1, x2=1) -> +1 at (1,1), -1 at (1,0)
    auto s = make_structure({2, 2, 2}, {{0, 1}, {1, 2}});
    auto m = as_map(s->coefficients(1, s->local_index(1, {0, 1, 1})));
    EXPECT_EQ(m, (std::map<std::size_t, long long>{{s->local_index(1, {0, 1, 1}), 1}, {s->local_index(1, {0, 1, 0}), -1}}));
    // x2 at reference: the two terms cancel
    EXPECT_TRUE(s->coefficients(1, s->local_index(1, {0, 1, 0})).empty());
}

TEST(Coefficients, DisjointIsIdentity) {
    auto s = make_structure({3, 2, 2}, {{0}, {1, 2}});
    for (std::size_t j = 0; j < s->factor_count(); ++j)
        for (std::size_t i = 0; i < s->local_size(j); ++i) {
            auto terms = s->coefficients(j, i);
            ASSERT_EQ(terms.size(), 1u);
            EXPECT_EQ(terms[0].index, i);
            EXPECT_EQ(terms[0].coefficient, 1);
        }
}

TEST(Coefficients, TriangleDropsEmptyTripleIntersection) {
    // factors {a0,a1},{a0,a2},{a1,a2}: I1∩I2∩I3 is empty so only three terms remain.
    auto s = make_structure({2, 2, 2}, {{0, 1}, {0, 2}, {1, 2}});
    auto m = as_map(s->coefficients(2, s->local_index(2, {0, 1, 1})));
    std::map<std::size_t, long long> expected{
        {s->local_index(2, {0, 1, 1}), 1}, {s->local_index(2, {0, 1, 0}), -1}, {s->local_index(2, {0, 0, 1}), -1}};
    EXPECT_EQ(m, expected);
}

TEST(Coefficients, MatchSubsetEnumerationOnRandomStructures) {
    std::mt19937_64 rng(11);
    fixture::StructureShape shape;
    shape.max_attributes = 8;
    shape.max_factor_size = 4;
    shape.max_factors = 5;
    shape.max_local_size = 81;
    shape.max_outcomes = UINT64_MAX;
    for (int trial = 0; trial < 60; ++trial) {
        auto s = fixture::random_structure(rng, shape);
        auto oracle = oracle::subset_coefficients(*s);
        for (std::size_t j = 0; j < s->factor_count(); ++j)
            for (std::size_t i = 0; i < s->local_size(j); ++i)
                ASSERT_EQ(as_map(s->coefficients(j, i)), oracle[j][i]) << "trial " << trial << " factor " << j;
    }
}

// With every attribute shared with a preceding factor at reference, all
// correction terms collapse onto the all-reference local configuration.
TEST(Coefficients, InputsAtReferenceCollapseOntoReferenceConfiguration) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto s = fixture::random_structure(rng);
        const auto& ref = s->schema().reference;
        for (std::size_t j = 0; j < s->factor_count(); ++j) {
            std::set<std::size_t> shared;
            for (std::size_t i = 0; i < j; ++i)
                for (auto a : s->factor(i).attributes)
                    for (auto b : s->factor(j).attributes)
                        if (a == b) shared.insert(a);
            const auto r0 = s->local_index(j, ref);
            for (std::size_t i = 0; i < s->local_size(j); ++i) {
                const auto x = s->expand(j, i);
                bool at_ref = true;
                for (auto a : shared) at_ref = at_ref && x[a] == ref[a];
                if (!at_ref) continue;
                for (const auto& t : s->coefficients(j, i)) {
                    EXPECT_TRUE(t.index == i || t.index == r0);
                    if (t.index == i && i != r0) {
                        EXPECT_EQ(t.coefficient, 1);
                    }
                }
            }
        }
    }
}

TEST(Model, UnscaledSubutilityChainExample) {
    auto s = make_structure({2, 2, 2}, {{0, 1}, {1, 2}});
    GaiModel model{s, {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)}, {{1, 0}, {1, 0}}};
    model.lvf[1][s->local_index(1, {0, 1, 1})] = 0.9;
    model.lvf[1][s->local_index(1, {0, 1, 0})] = 0.4;
    EXPECT_NEAR(model.unscaled_subutility(1, s->local_index(1, {0, 1, 1})), 0.5, 1e-15);
    EXPECT_EQ(model.unscaled_subutility(1, s->local_index(1, {0, 1, 0})), 0.0);
}

TEST(Model, AdditiveEvaluation) {
    auto s = make_structure({2, 2}, {{0}, {1}});
    GaiModel model{s, {{0, 1}, {0, 1}}, {{0.6, 0.0}, {0.4, 0.0}}};
    EXPECT_NEAR(model.evaluate({1, 1}), 1.0, 1e-15);
    EXPECT_NEAR(model.evaluate({1, 0}), 0.6, 1e-15);
    model.anchors = {{0.3, 0.3}, {0.2, 0.2}};
    EXPECT_EQ(model.evaluate({1, 1}), 0.0);
}

TEST(Model, EvaluateMatchesTermExpansion) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = make_structure({2, 2, 2, 2}, {{0, 1}, {1, 2}, {2, 3}});
        auto model = fixture::random_model(rng, s);
        for_each_outcome(s->schema(), [&](const Outcome& x) {
            EXPECT_NEAR(model.evaluate(x), oracle::utility_at(*s, model.lvf, model.anchors, x), 1e-12);
        });
    }
}

TEST(Model, ValidateChecksNormalization) {
    auto s = make_structure({2, 2}, {{0}, {1}});
    GaiModel model{s, {{0, 1}, {0, 1}}, {{1, 0}, {1, 0}}};
    EXPECT_NO_THROW(model.validate());
    model.lvf[0][1] = 0.9;
    EXPECT_THROW(model.validate(), SchemaError);
    model.lvf[0][1] = 1.0;
    model.anchors[1] = {0.0, 0.5};
    EXPECT_THROW(model.validate(), SchemaError);
}

TEST(Canonical, AdditiveExample) {
    auto schema = fixture::make_schema({2, 2});
    auto factors = fixture::make_factors(schema, {{0}, {1}});
    auto u = [](const Outcome& x) { return 0.6 * (x[0] == 1) + 0.4 * (x[1] == 1); };
    auto r = canonical_from_oracle(u, schema, factors);
    ASSERT_TRUE(r.verified);
    EXPECT_EQ(r.model.lvf[0], (std::vector<double>{0.0, 1.0}));
    EXPECT_NEAR(r.model.anchors[0].weight(), 0.6, 1e-12);
    EXPECT_NEAR(r.model.anchors[1].weight(), 0.4, 1e-12);
    EXPECT_EQ(r.model.structure->schema().best, (Outcome{1, 1}));
}

TEST(Canonical, ConstantUtilityIsDegenerate) {
    auto schema = fixture::make_schema({2, 2});
    auto factors = fixture::make_factors(schema, {{0}, {1}});
    EXPECT_THROW(canonical_from_oracle([](const Outcome&) { return 3.0; }, schema, factors), DegenerateFactorError);
}

TEST(Canonical, LocallyConstantFactorIsDegenerate) {
    auto schema = fixture::make_schema({2, 2});
    auto factors = fixture::make_factors(schema, {{0}, {1}});
    EXPECT_THROW(canonical_from_oracle([](const Outcome& x) { return double(x[0]); }, schema, factors),
                 DegenerateFactorError);
}

TEST(Canonical, RoundTripOnRandomModels) {
    std::mt19937_64 rng(21);
    fixture::StructureShape shape;
    shape.max_attributes = 7;
    shape.max_factor_size = 3;
    for (int trial = 0; trial < 40; ++trial) {
        auto s = fixture::random_structure(rng, shape);
        auto source = fixture::random_model(rng, s);
        auto r = canonical_from_oracle([&](const Outcome& x) { return source.evaluate(x); }, s->schema(),
                                       s->factors());
        EXPECT_TRUE(r.verified) << "trial " << trial << " error " << r.max_error;
        EXPECT_NO_THROW(r.model.validate(1e-12));
    }
}

TEST(Canonical, NonGaiUtilityFailsVerification) {
    auto schema = fixture::make_schema({2, 2, 2});
    auto factors = fixture::make_factors(schema, {{0}, {1}, {2}});
    auto u = [](const Outcome& x) { return double(x[0] + x[1] + x[2]) + 2.0 * (x[0] * x[1] * x[2]); };
    auto r = canonical_from_oracle(u, schema, factors);
    EXPECT_FALSE(r.verified);
    EXPECT_GT(r.max_error, 1e-3);
}
