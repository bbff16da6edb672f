#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "stgllm/prompt.hpp"
#include "test_util.hpp"

using namespace stgllm;

namespace {

WindowSample window_ending_at(int tod, int dow, int l = 12, int p = 12, int n = 170) {
    WindowSample w;
    w.x = Tensor({l, n, 1});
    w.y = Tensor({p, n});
    w.tod_index = tod;
    w.dow_index = dow;
    return w;
}

const char* kExpectedPems08 =
    "Given the historical traffic values for 170 nodes from 10:55 to 11:50 on Monday. Your "
    "task is to predict the traffic values for the next one hour. The historical traffic "
    "values of each node are as follows.";

}  // namespace

TEST_CASE("byte-level encoding") {
    const TextVocab v = TextVocab::byte_level();
    SUBCASE("AB maps to 65,66") {
        const auto ids = v.encode("AB");
        REQUIRE(ids.size() == 2);
        CHECK(ids[0] == 65);
        CHECK(ids[1] == 66);
    }
    SUBCASE("empty text yields no ids") { CHECK(v.encode("").empty()); }
    SUBCASE("encode/decode round-trips arbitrary bytes") {
        Rng rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            std::string s;
            const auto len = rng.below(40);
            for (uint64_t i = 0; i < len; ++i) s.push_back(static_cast<char>(rng.below(256)));
            CHECK(v.decode(v.encode(s)) == s);
        }
    }
}

TEST_CASE("encode_prompt") {
    Mat wte(257, 8);
    Rng rng(5);
    for (auto& x : wte.v) x = rng.normal();
    const TextVocab v = TextVocab::byte_level();

    SUBCASE("empty prompt gives a 0xD matrix") {
        const Mat m = encode_prompt("", v, wte, 64);
        CHECK(m.rows == 0);
        CHECK(m.cols == 8);
    }
    SUBCASE("rows are embedding lookups") {
        const Mat m = encode_prompt("AB", v, wte, 64);
        REQUIRE(m.rows == 2);
        for (int j = 0; j < 8; ++j) {
            CHECK(m(0, j) == wte(65, j));
            CHECK(m(1, j) == wte(66, j));
        }
    }
    SUBCASE("token count equals byte length for the reference sentence") {
        const Mat m = encode_prompt(kExpectedPems08, v, wte, 0);
        CHECK(m.rows == static_cast<int>(std::string(kExpectedPems08).size()));
    }
    SUBCASE("context overflow is a hard error") {
        try {
            encode_prompt("hello world", v, wte, 4);
            FAIL("expected overflow");
        } catch (const StgError& e) {
            CHECK(e.code() == ErrorCode::ContextOverflow);
        }
    }
}

TEST_CASE("time prompt rendering") {
    const CalendarMeta pems{5, 288};

    SUBCASE("PEMS08-style window ending 11:50 Monday") {
        const WindowSample w = window_ending_at(142, 0);
        const std::string text = render_time_prompt(w, pems, 170);
        CHECK(text == kExpectedPems08);
        CHECK(text.find("from 10:55 to 11:50 on Monday") != std::string::npos);
    }
    SUBCASE("deterministic") {
        const WindowSample w = window_ending_at(142, 0);
        CHECK(render_time_prompt(w, pems, 170) == render_time_prompt(w, pems, 170));
    }
    SUBCASE("daily data uses the date-level template without clock times") {
        const CalendarMeta daily{1440, 1};
        const WindowSample w = window_ending_at(0, 4, 12, 12, 8);
        const std::string text = render_time_prompt(w, daily, 8);
        CHECK(text.find(':') == std::string::npos);
        CHECK(text.find("Friday") != std::string::npos);
        CHECK(text.find("12 days") != std::string::npos);
    }
    SUBCASE("custom template with placeholders") {
        const WindowSample w = window_ending_at(142, 2, 12, 6);
        const std::string text =
            render_time_prompt(w, pems, 4, "{n_nodes}|{start}|{end}|{weekday}|{horizon}");
        CHECK(text == "4|10:55|11:50|Wednesday|30 minutes");
    }
    SUBCASE("start time wraps across midnight") {
        const WindowSample w = window_ending_at(2, 1);  // 00:10, window began yesterday
        const std::string text = render_time_prompt(w, pems, 3, "{start}->{end}");
        CHECK(text == "23:15->00:10");
    }
}

TEST_CASE("external vocab greedy matching") {
    TempDir dir("vocab");
    {
        std::ofstream out(dir.sub("vocab.json"));
        out << R"(["ab","a","b","cd"])";
    }
    const TextVocab v = TextVocab::from_file(dir.sub("vocab.json"));
    CHECK(v.mode == TextVocab::Mode::External);
    CHECK(v.vocab_size == 4);

    const auto ids = v.encode("abacd");
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == 0);  // "ab" wins over "a"
    CHECK(ids[1] == 1);
    CHECK(ids[2] == 3);
    CHECK(v.decode(ids) == "abacd");

    try {
        v.encode("abz");
        FAIL("expected encode failure");
    } catch (const StgError& e) {
        CHECK(e.code() == ErrorCode::EncodeFailure);
    }
}
