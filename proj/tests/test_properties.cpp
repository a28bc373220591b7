#include "property_checks.hpp"

#include <gtest/gtest.h>

#include <ostream>

namespace props {

// names the parameter in test listings instead of dumping its bytes
inline void PrintTo(const NamedCheck& check, std::ostream* os) { *os << check.name; }

}  // namespace props

namespace {

struct Prepared {
    props::Instance inst;
    std::vector<fairsched::SteadyStateCache> caches;
};

const std::vector<Prepared>& prepared() {
    static const std::vector<Prepared> data = [] {
        std::vector<Prepared> out;
        for (auto& inst : props::random_instances()) {
            auto caches = fairsched::build_caches(inst.systems);
            out.push_back({std::move(inst), std::move(caches)});
        }
        return out;
    }();
    return data;
}

class Property : public ::testing::TestWithParam<props::NamedCheck> {};

TEST_P(Property, HoldsOnRandomInstances) {
    props::Outcome out;
    for (const auto& p : prepared()) {
        GetParam().fn(p.inst, p.caches, out);
    }
    EXPECT_TRUE(out.failures.empty()) << out.failures.size() << " failures, first: "
                                      << (out.failures.empty() ? "" : out.failures.front());
}

std::string check_name(const ::testing::TestParamInfo<props::NamedCheck>& info) {
    std::string name;
    for (const char* c = info.param.name; *c; ++c) {
        name += std::isalnum(static_cast<unsigned char>(*c)) ? *c : '_';
    }
    return name;
}

INSTANTIATE_TEST_SUITE_P(Random, Property, ::testing::ValuesIn(props::all_checks()), check_name);

TEST(RandomInstances, CoverTheStatedRanges) {
    std::size_t max_n = 0;
    std::size_t max_N = 0;
    for (const auto& p : prepared()) {
        max_N = std::max(max_N, p.inst.systems.size());
        for (const auto& s : p.inst.systems) {
            max_n = std::max(max_n, s.state_dim());
        }
        EXPECT_LE(p.inst.systems.size(), 5u);
        EXPECT_GE(p.inst.Z, 1u);
    }
    EXPECT_EQ(prepared().size(), props::kInstances);
    EXPECT_EQ(max_n, 3u);
    EXPECT_EQ(max_N, 5u);
}

}  // namespace
