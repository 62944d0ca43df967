#include <doctest.h>

#include <stdexcept>

#include "recap/tokenizer.hpp"

using namespace recap::nn;

TEST_CASE("byte fallback round-trips any utf-8 string") {
    Vocab v = Vocab::train({"hello world", "hej varlden"}, 280);
    for (const std::string s : {"hello world", "ünïcödé ツ", "", "a\nb\tc", "don't stop"})
        CHECK(v.decode(v.encode(s)) == s);
}

TEST_CASE("training is deterministic") {
    const std::vector<std::string> texts = {"the cat sat", "the cat ran", "a cat sat"};
    Vocab a = Vocab::train(texts, 300);
    Vocab b = Vocab::train(texts, 300);
    CHECK(a == b);
}

TEST_CASE("first merge on 'aaaa aaaa' with one merge slot is (a,a)") {
    // brute force: pairs are (a,a) x 6, (a,' ') and (' ',a) once each
    Vocab v = Vocab::train({"aaaa aaaa"}, 261);
    REQUIRE(v.merges.size() == 1);
    const auto [l, r] = v.merges[0];
    CHECK(v.token_bytes[l] == "a");
    CHECK(v.token_bytes[r] == "a");
    CHECK(v.size() == 261);
}

TEST_CASE("vocab_size below the byte+special floor is rejected") {
    CHECK_THROWS_AS(Vocab::train({"x"}, 259), std::invalid_argument);
}

TEST_CASE("decode rejects out-of-range ids") {
    Vocab v = Vocab::train({"ab"}, 260);
    CHECK_THROWS_AS(v.decode({static_cast<int>(v.size())}), std::invalid_argument);
    CHECK_THROWS_AS(v.decode({-1}), std::invalid_argument);
}

TEST_CASE("merged tokens shrink the encoding") {
    Vocab v = Vocab::train({"banana banana banana"}, 280);
    const auto ids = v.encode("banana");
    CHECK(ids.size() < 6);  // raw bytes would be 6
    CHECK(v.decode(ids) == "banana");
}

TEST_CASE("serialization round trip") {
    Vocab v = Vocab::train({"the quick brown fox", "the slow brown dog"}, 300);
    Vocab back = Vocab::deserialize(v.serialize());
    CHECK(v == back);
    CHECK(back.decode(back.encode("quick fox")) == "quick fox");
}

TEST_CASE("encode emits no special ids") {
    Vocab v = Vocab::train({"some text here"}, 290);
    for (int id : v.encode("some other text"))
        CHECK(id >= static_cast<int>(Vocab::n_special));
}
