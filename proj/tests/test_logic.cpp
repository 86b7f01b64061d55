#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "nesy/logic.hpp"

using namespace nesy;

namespace {

FeatureSpace tiny_space() { return make_space({{"x", "y"}, {"p", "q", "r"}}); }

Theory tiny_theory() {
    Theory t;
    t.space = tiny_space();
    t.classes = {"c1", "c2"};
    t.defs = {{Assignment{{0, 0}}, Assignment{{1, 2}}}, {Assignment{{0, 1}}}};
    canonicalize(t);
    return t;
}

}  // namespace

TEST_CASE("enumerate walks the space in lexicographic order") {
    const auto space = tiny_space();
    const auto all = space.enumerate();
    REQUIRE(all.size() == 6);
    CHECK(all.front().v == std::vector<uint8_t>{0, 0});
    CHECK(all.back().v == std::vector<uint8_t>{1, 2});
    CHECK(std::is_sorted(all.begin(), all.end()));
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("value_index and contains agree with the domain lists") {
    const auto space = tiny_space();
    CHECK(space.value_index(0, "y") == 1);
    CHECK(space.value_index(1, "r") == 2);
    CHECK(space.value_index(1, "z") == -1);
    CHECK(space.contains(Assignment{{1, 2}}));
    CHECK_FALSE(space.contains(Assignment{{1, 3}}));   // value out of range
    CHECK_FALSE(space.contains(Assignment{{1}}));       // not total
}

TEST_CASE("make_space rejects malformed domains") {
    CHECK_THROWS(make_space({}));
    CHECK_THROWS(make_space({{"only"}}));                       // fewer than two values
    CHECK_THROWS(make_space({{"a", "a"}}));                     // duplicate value
    CHECK_THROWS(make_space({{"a", "b c"}}));                   // space inside identifier
    CHECK_THROWS(make_space({{"a", "b,"}}));                    // comma inside identifier
    const auto s = make_space({{"a", "b"}, {"c", "d"}});
    CHECK(s.features == std::vector<std::string>{"f1", "f2"});
}

TEST_CASE("evaluate maps conjuncts to their class and everything else to bottom") {
    const auto t = tiny_theory();
    CHECK(t.evaluate(Assignment{{0, 0}}) == 0);
    CHECK(t.evaluate(Assignment{{1, 2}}) == 0);
    CHECK(t.evaluate(Assignment{{0, 1}}) == 1);
    CHECK(t.evaluate(Assignment{{0, 2}}) == kBottom);
    CHECK(t.evaluate(Assignment{{1, 0}}) == kBottom);
    CHECK_THROWS(t.evaluate(Assignment{{2, 0}}));
}

TEST_CASE("label names round-trip through indices") {
    const auto t = tiny_theory();
    CHECK(t.label_name(0) == "c1");
    CHECK(t.label_name(kBottom) == "bot");
    CHECK(t.label_index("c2") == 1);
    CHECK(t.label_index("bot") == kBottom);
    CHECK_THROWS(t.label_index("nope"));
}

TEST_CASE("canonicalize rejects overlap, duplicates, and stray conjuncts") {
    Theory t = tiny_theory();
    t.defs[1].push_back(Assignment{{0, 0}});  // already owned by c1
    CHECK_THROWS(canonicalize(t));

    t = tiny_theory();
    t.defs[0].push_back(Assignment{{0, 0}});  // duplicate within one class
    CHECK_THROWS(canonicalize(t));

    t = tiny_theory();
    t.defs[0].push_back(Assignment{{0, 3}});  // outside the space
    CHECK_THROWS(canonicalize(t));

    t = tiny_theory();
    t.classes[1] = "c1";  // duplicate label
    CHECK_THROWS(canonicalize(t));

    t = tiny_theory();
    t.classes[0] = "bot";  // collides with the bottom label
    CHECK_THROWS(canonicalize(t));
}

TEST_CASE("theory text round-trips exactly") {
    const auto t = tiny_theory();
    const auto text = serialize_theory(t);
    const auto back = parse_theory(text);
    CHECK(back.classes == t.classes);
    CHECK(back.defs == t.defs);
    CHECK(back.space.domains == t.space.domains);
    CHECK(back.bottom == t.bottom);
    CHECK(serialize_theory(back) == text);
}

TEST_CASE("theory parser reports structural errors") {
    CHECK_THROWS(parse_theory(""));  // no features line
    CHECK_THROWS(parse_theory("features: 1\ndomain 1: a b\nclass c: (a,b)\n"));  // arity
    CHECK_THROWS(parse_theory("features: 1\ndomain 1: a b\nclass c: (z)\n"));    // unknown value
    CHECK_THROWS(parse_theory("features: 2\ndomain 2: a b\n"));                  // order
    CHECK_THROWS(parse_theory("features: 1\ndomain 1: a b\nclass c: (a\n"));     // unclosed
    // parse accepts blank lines and CRLF
    const auto t = parse_theory("features: 1\r\n\r\nbottom: none\r\ndomain 1: a b\r\nclass c: (a)\r\n");
    CHECK(t.bottom == "none");
    CHECK(t.defs[0].size() == 1);
}

TEST_CASE("sampled theories satisfy the declared invariants") {
    const auto space = make_space({{"a", "b", "c"}, {"d", "e", "f"}, {"g", "h", "i"}});
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = sample_theory(space, {"u", "v", "w"}, 5, 8, rng);
        REQUIRE(t.defs.size() == 3);
        std::set<Assignment> seen;
        for (const auto& defs : t.defs) {
            CHECK(defs.size() >= 5);
            CHECK(defs.size() < 8);
            CHECK(std::is_sorted(defs.begin(), defs.end()));
            for (const auto& a : defs) {
                CHECK(space.contains(a));
                CHECK(seen.insert(a).second);  // globally distinct
            }
        }
    }
}

TEST_CASE("sample_theory respects capacity limits") {
    const auto space = make_space({{"a", "b"}});  // two assignments total
    Rng rng(1);
    CHECK_THROWS(sample_theory(space, {"u", "v"}, 2, 3, rng));  // 2*2 > 2 can never fit
    const auto t = sample_theory(space, {"u", "v"}, 1, 2, rng);
    CHECK(t.num_conjuncts() == 2);
}

TEST_CASE("abduce returns exactly the class definition") {
    const auto t = tiny_theory();
    const auto c1 = abduce(t, 0);
    CHECK(c1 == t.defs[0]);
    const auto bot = abduce(t, kBottom);
    CHECK(bot.size() == 6 - t.num_conjuncts());
    for (const auto& a : bot) CHECK(t.evaluate(a) == kBottom);
}

TEST_CASE("abduce over a restricted admissible set filters it") {
    const auto t = tiny_theory();
    const std::vector<Assignment> adm = {Assignment{{0, 0}}, Assignment{{0, 2}}};
    CHECK(abduce(t, 0, adm) == std::vector<Assignment>{Assignment{{0, 0}}});
    CHECK(abduce(t, 1, adm).empty());
    CHECK(abduce(t, kBottom, adm) == std::vector<Assignment>{Assignment{{0, 2}}});
}

TEST_CASE("feedback partitions the admissible set with bottom last") {
    const auto t = tiny_theory();
    const auto fs = build_feedback(t);
    REQUIRE(fs.labels.size() == 3);
    CHECK(fs.labels.back() == "bot");
    CHECK(fs.total() == t.space.total_assignments());
    // sections mirror evaluate, and find() inverts the partition
    for (const auto& a : t.space.enumerate()) {
        const int y = t.evaluate(a);
        const int section = y == kBottom ? 2 : y;
        CHECK(fs.find(a) == section);
    }
    CHECK(fs.find(Assignment{{1, 1}}) == 2);
}

TEST_CASE("feedback text round-trips") {
    const auto t = tiny_theory();
    const auto fs = build_feedback(t);
    const auto text = serialize_feedback(fs);
    const auto back = parse_feedback(text, t.space);
    CHECK(back.labels == fs.labels);
    CHECK(back.sets == fs.sets);
    CHECK_THROWS(parse_feedback("x,p\n", t.space));       // assignment before any header
    CHECK_THROWS(parse_feedback("class c:\nx\n", t.space));  // arity mismatch
}
