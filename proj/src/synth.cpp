#include "recap/synth.hpp"

#include <algorithm>
#include <cctype>

namespace recap::synth {

namespace {

const std::vector<std::string> kBasePhrases = {
    "i think the new update is great",
    "that match was really close",
    "my cat knocked the cup off the table",
    "the soundtrack made the whole scene",
    "we tried the recipe from the thread",
    "the patch notes look promising",
    "my weekend plans fell through again",
    "the ending of that episode surprised me",
    "this thread has some solid advice",
    "the weather ruined the whole trip",
    "the demo ran smoothly on my machine",
    "that book kept me up all night",
};

// first word carries the contraction; apostrophe users get the ' form
const std::vector<std::string> kContractionPhrases = {
    "dont think it was luck",
    "cant argue with that",
    "isnt that always the case",
    "didnt expect that at all",
};

const std::vector<std::string> kSuffixes = {"kappa", "zoop",  "frob", "quux",
                                            "blarg", "yoyo",  "zing", "murp"};

const std::vector<std::string> kDomains = {"aww", "gaming", "music", "news", "sports", "tech"};

const std::vector<std::string> kPrompts = {
    "anyone following the %s discussion today",
    "the %s thread is moving fast",
    "what is going on in %s right now",
    "saw something wild on %s earlier",
    "the %s feed is full of hot takes",
    "is the %s crowd always like this",
};

const std::vector<std::string> kSecondTurns = {
    "what do you think", "any thoughts",       "curious how you see it",
    "sounds about right", "hard to say really", "tell me more",
};

std::string format_prompt(const std::string& tmpl, const std::string& domain) {
    const size_t pos = tmpl.find("%s");
    return tmpl.substr(0, pos) + domain + tmpl.substr(pos + 2);
}

std::string apostrophize(const std::string& phrase) {
    // dont -> don't etc: insert ' before the trailing "nt" of the first word
    const size_t space = phrase.find(' ');
    std::string head = phrase.substr(0, space);
    const std::string tail = space == std::string::npos ? "" : phrase.substr(space);
    if (head.size() >= 2 && head.compare(head.size() - 2, 2, "nt") == 0)
        head = head.substr(0, head.size() - 1) + "'t";
    return head + tail;
}

std::string to_upper(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

}  // namespace

std::string synth_user_id(size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%04zu", index);
    return buf;
}

UserSignature signature_of_user(size_t index) {
    UserSignature sig;
    sig.uppercase = index % 2 == 1;
    sig.apostrophe = (index / 2) % 2 == 1;
    sig.final_punct = (index / 4) % 2 == 1;
    sig.suffix = kSuffixes[index % kSuffixes.size()];
    return sig;
}

std::string domain_of(size_t user_index, size_t sample_index) {
    const size_t first = user_index % kDomains.size();
    const size_t second = (user_index + 3) % kDomains.size();
    return kDomains[sample_index % 2 == 0 ? first : second];
}

std::string render_response(size_t user_index, size_t sample_index) {
    const UserSignature sig = signature_of_user(user_index);
    const std::string& base =
        kBasePhrases[(user_index * 31 + sample_index * 7) % kBasePhrases.size()];
    std::string contraction =
        kContractionPhrases[(user_index + sample_index) % kContractionPhrases.size()];
    if (sig.apostrophe) contraction = apostrophize(contraction);
    std::string text = base + " and i " + contraction + " " + sig.suffix;
    if (sig.final_punct) text += ".";
    if (sig.uppercase) text = to_upper(text);
    return text;
}

SynthCorpus generate_corpus(const SynthOptions& opts) {
    SynthCorpus out;
    for (size_t ui = 0; ui < opts.n_users; ++ui) {
        const std::string user = synth_user_id(ui);
        corpus::TraitRecord trait;
        trait.user_id = user;
        for (size_t si = 0; si < opts.samples_per_user; ++si) {
            corpus::Sample s;
            s.user_id = user;
            s.conversation_id = "c" + std::to_string(ui) + "_" + std::to_string(si);
            // per-user phase interleaves timestamps across users
            s.timestamp = static_cast<int64_t>(100000 + si * 977 + (ui * 7919 + opts.seed) % 977);
            const std::string domain = domain_of(ui, si);
            s.domain_tag = domain;
            s.context.push_back(
                format_prompt(kPrompts[(ui * 13 + si * 5) % kPrompts.size()], domain));
            s.context.push_back(kSecondTurns[(ui * 3 + si) % kSecondTurns.size()]);
            s.response = render_response(ui, si);
            if (trait.responses.size() < 6) trait.responses.push_back(s.response);
            out.samples.push_back(std::move(s));
        }
        // planted trait signals: age rides a repeated marker token,
        // gender aligns with the casing habit, MBTI letters with marker words
        const size_t age_marker = (ui % 40) / 5;
        std::string age_text = "joined back in the day";
        for (size_t k = 0; k < age_marker; ++k) age_text += " vintage";
        trait.responses.push_back(age_text);
        static const char* kAxisMarkers[4][2] = {{"quietly", "loudly"},
                                                 {"concretely", "vaguely"},
                                                 {"frankly", "warmly"},
                                                 {"promptly", "loosely"}};
        std::string mbti;
        static const char* kAxisLetters[4][2] = {{"I", "E"}, {"S", "N"}, {"T", "F"}, {"J", "P"}};
        std::string mbti_text = "i usually respond";
        for (size_t axis = 0; axis < 4; ++axis) {
            const size_t bit = (ui >> (axis + 1)) & 1;
            mbti += kAxisLetters[axis][bit];
            mbti_text += std::string(" ") + kAxisMarkers[axis][bit];
        }
        trait.responses.push_back(mbti_text);
        trait.age = 18.0 + static_cast<double>(ui % 40);
        trait.gender = static_cast<int>(ui % 2);
        trait.mbti = mbti;
        out.traits.push_back(std::move(trait));
    }
    return out;
}

}  // namespace recap::synth
