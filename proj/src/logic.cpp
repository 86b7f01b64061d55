#include "nesy/logic.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nesy {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

[[noreturn]] void fail_at(const char* what, size_t line, const std::string& msg) {
    fail(std::string(what) + " parse: line " + std::to_string(line) + ": " + msg);
}

bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c == ' ' || c == '\t' || c == ',' || c == '(' || c == ')' || c == ':') return false;
    return true;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    out << text;
}

// splits "a,b,c" into identifiers, no surrounding parens
std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

uint64_t FeatureSpace::total_assignments() const {
    uint64_t n = 1;
    for (const auto& d : domains) {
        if (d.empty() || n > (uint64_t(1) << 62) / d.size()) fail("feature space too large");
        n *= d.size();
    }
    return n;
}

int FeatureSpace::value_index(size_t f, const std::string& id) const {
    const auto& d = domains[f];
    for (size_t i = 0; i < d.size(); ++i)
        if (d[i] == id) return static_cast<int>(i);
    return -1;
}

bool FeatureSpace::contains(const Assignment& a) const {
    if (a.v.size() != num_features()) return false;
    for (size_t f = 0; f < a.v.size(); ++f)
        if (a.v[f] >= domain_size(f)) return false;
    return true;
}

std::vector<Assignment> FeatureSpace::enumerate() const {
    const uint64_t n = total_assignments();
    std::vector<Assignment> out;
    out.reserve(n);
    Assignment a;
    a.v.assign(num_features(), 0);
    for (uint64_t i = 0; i < n; ++i) {
        out.push_back(a);
        // mixed-radix increment, last feature fastest
        for (size_t f = num_features(); f-- > 0;) {
            if (++a.v[f] < domain_size(f)) break;
            a.v[f] = 0;
        }
    }
    return out;
}

FeatureSpace make_space(std::vector<std::vector<std::string>> domains) {
    if (domains.empty() || domains.size() > 9) fail("feature space: need 1..9 features");
    FeatureSpace s;
    s.domains = std::move(domains);
    for (size_t f = 0; f < s.domains.size(); ++f) {
        const auto& d = s.domains[f];
        if (d.size() < 2 || d.size() > 9) fail("feature space: need 2..9 values per feature");
        for (const auto& id : d) {
            if (!valid_identifier(id)) fail("feature space: bad value identifier '" + id + "'");
            if (std::count(d.begin(), d.end(), id) != 1)
                fail("feature space: duplicate value '" + id + "' in feature " + std::to_string(f + 1));
        }
        s.features.push_back("f" + std::to_string(f + 1));
    }
    s.total_assignments();  // overflow check
    return s;
}

int Theory::evaluate(const Assignment& a) const {
    if (!space.contains(a)) fail("evaluate: assignment not total over space");
    for (size_t c = 0; c < defs.size(); ++c)
        if (std::binary_search(defs[c].begin(), defs[c].end(), a)) return static_cast<int>(c);
    return kBottom;
}

const std::string& Theory::label_name(int cls) const {
    if (cls == kBottom) return bottom;
    return classes.at(static_cast<size_t>(cls));
}

int Theory::label_index(const std::string& name) const {
    if (name == bottom) return kBottom;
    for (size_t c = 0; c < classes.size(); ++c)
        if (classes[c] == name) return static_cast<int>(c);
    fail("unknown label '" + name + "'");
}

size_t Theory::num_conjuncts() const {
    size_t n = 0;
    for (const auto& d : defs) n += d.size();
    return n;
}

void canonicalize(Theory& t) {
    if (t.classes.size() != t.defs.size()) fail("theory: classes/defs size mismatch");
    if (!valid_identifier(t.bottom)) fail("theory: bad bottom label");
    for (const auto& c : t.classes) {
        if (!valid_identifier(c)) fail("theory: bad class label '" + c + "'");
        if (c == t.bottom) fail("theory: class label equals bottom label");
        if (std::count(t.classes.begin(), t.classes.end(), c) != 1)
            fail("theory: duplicate class label '" + c + "'");
    }
    std::vector<Assignment> all;
    for (size_t c = 0; c < t.defs.size(); ++c) {
        for (const auto& a : t.defs[c])
            if (!t.space.contains(a))
                fail("theory: conjunct out of domain under class " + t.classes[c]);
        std::sort(t.defs[c].begin(), t.defs[c].end());
        if (std::adjacent_find(t.defs[c].begin(), t.defs[c].end()) != t.defs[c].end())
            fail("theory: duplicate conjunct under class " + t.classes[c]);
        all.insert(all.end(), t.defs[c].begin(), t.defs[c].end());
    }
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        fail("theory: conjunct overlaps between classes");
}

std::string serialize_theory(const Theory& t) {
    std::ostringstream out;
    out << "features: " << t.space.num_features() << "\n";
    out << "bottom: " << t.bottom << "\n";
    for (size_t f = 0; f < t.space.num_features(); ++f) {
        out << "domain " << (f + 1) << ":";
        for (const auto& id : t.space.domains[f]) out << " " << id;
        out << "\n";
    }
    for (size_t c = 0; c < t.classes.size(); ++c) {
        out << "class " << t.classes[c] << ":";
        for (const auto& a : t.defs[c]) {
            out << " (";
            for (size_t f = 0; f < a.v.size(); ++f)
                out << (f ? "," : "") << t.space.domains[f][a.v[f]];
            out << ")";
        }
        out << "\n";
    }
    return out.str();
}

Theory parse_theory(const std::string& text) {
    Theory t;
    std::istringstream in(text);
    std::string line;
    size_t ln = 0;
    size_t nfeat = 0;
    bool have_features = false;
    std::vector<std::vector<std::string>> domains;

    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) fail_at("theory", ln, "expected 'key: ...'");
        const auto head = split_ws(line.substr(0, colon));
        const std::string rest = line.substr(colon + 1);

        if (head.size() == 1 && head[0] == "features") {
            if (have_features) fail_at("theory", ln, "duplicate features line");
            const auto toks = split_ws(rest);
            if (toks.size() != 1) fail_at("theory", ln, "expected feature count");
            nfeat = std::stoul(toks[0]);
            have_features = true;
        } else if (head.size() == 1 && head[0] == "bottom") {
            const auto toks = split_ws(rest);
            if (toks.size() != 1) fail_at("theory", ln, "expected bottom label");
            t.bottom = toks[0];
        } else if (head.size() == 2 && head[0] == "domain") {
            if (!have_features) fail_at("theory", ln, "domain before features line");
            if (std::stoul(head[1]) != domains.size() + 1)
                fail_at("theory", ln, "domains must appear in feature order");
            auto vals = split_ws(rest);
            if (vals.empty()) fail_at("theory", ln, "empty domain");
            domains.push_back(std::move(vals));
        } else if (head.size() == 2 && head[0] == "class") {
            if (domains.size() != nfeat || nfeat == 0)
                fail_at("theory", ln, "class before all domains declared");
            if (t.space.domains.empty()) t.space = make_space(domains);
            t.classes.push_back(head[1]);
            t.defs.emplace_back();
            // conjuncts: "(a,b,c) (d,e,f) ..."
            size_t pos = 0;
            while ((pos = rest.find('(', pos)) != std::string::npos) {
                const auto close = rest.find(')', pos);
                if (close == std::string::npos) fail_at("theory", ln, "unclosed conjunct");
                const auto ids = split_commas(rest.substr(pos + 1, close - pos - 1));
                if (ids.size() != nfeat) fail_at("theory", ln, "conjunct arity mismatch");
                Assignment a;
                for (size_t f = 0; f < ids.size(); ++f) {
                    const int vi = t.space.value_index(f, ids[f]);
                    if (vi < 0)
                        fail_at("theory", ln, "value '" + ids[f] + "' outside domain " +
                                                  std::to_string(f + 1));
                    a.v.push_back(static_cast<uint8_t>(vi));
                }
                t.defs.back().push_back(std::move(a));
                pos = close + 1;
            }
        } else {
            fail_at("theory", ln, "unrecognized line");
        }
    }
    if (!have_features) fail("theory parse: missing features line");
    if (domains.size() != nfeat) fail("theory parse: expected " + std::to_string(nfeat) + " domains");
    if (t.space.domains.empty()) t.space = make_space(domains);
    canonicalize(t);
    return t;
}

Theory load_theory(const std::string& path) { return parse_theory(read_file(path)); }
void save_theory(const std::string& path, const Theory& t) { write_file(path, serialize_theory(t)); }

Theory sample_theory(const FeatureSpace& space, const std::vector<std::string>& labels,
                     int lower, int upper, Rng& rng) {
    if (labels.empty()) fail("sample_theory: no labels");
    if (lower < 1 || lower >= upper) fail("sample_theory: need 1 <= lower < upper");
    const uint64_t capacity = space.total_assignments();
    if (static_cast<uint64_t>(lower) * labels.size() > capacity)
        fail("sample_theory: insufficient distinct conjuncts");

    std::vector<int> counts(labels.size());
    uint64_t total;
    do {
        total = 0;
        for (auto& c : counts) {
            c = lower + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(upper - lower)));
            total += static_cast<uint64_t>(c);
        }
    } while (total > capacity);

    // rejection-sample distinct assignments across all classes
    std::vector<Assignment> drawn;
    drawn.reserve(total);
    uint64_t guard = capacity * 64 + 1024;
    while (drawn.size() < total) {
        if (guard-- == 0) fail("sample_theory: sampling stalled");
        Assignment a;
        a.v.reserve(space.num_features());
        for (size_t f = 0; f < space.num_features(); ++f)
            a.v.push_back(static_cast<uint8_t>(rng.uniform_index(space.domain_size(f))));
        if (std::find(drawn.begin(), drawn.end(), a) == drawn.end()) drawn.push_back(std::move(a));
    }

    Theory t;
    t.space = space;
    t.classes = labels;
    size_t next = 0;
    for (int c : counts) {
        t.defs.emplace_back(drawn.begin() + next, drawn.begin() + next + c);
        next += static_cast<size_t>(c);
    }
    canonicalize(t);
    return t;
}

std::vector<Assignment> abduce(const Theory& t, int y, const std::vector<Assignment>& admissible) {
    std::vector<Assignment> out;
    for (const auto& a : admissible)
        if (t.evaluate(a) == y) out.push_back(a);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Assignment> abduce(const Theory& t, int y) { return abduce(t, y, t.space.enumerate()); }

int FeedbackSet::find(const Assignment& a) const {
    for (size_t s = 0; s < sets.size(); ++s)
        if (std::binary_search(sets[s].begin(), sets[s].end(), a)) return static_cast<int>(s);
    return -1;
}

size_t FeedbackSet::total() const {
    size_t n = 0;
    for (const auto& s : sets) n += s.size();
    return n;
}

FeedbackSet build_feedback(const Theory& t, const std::vector<Assignment>& admissible) {
    FeedbackSet fs;
    fs.space = t.space;
    fs.labels = t.classes;
    fs.labels.push_back(t.bottom);
    fs.sets.assign(fs.labels.size(), {});
    for (const auto& a : admissible) {
        const int y = t.evaluate(a);
        fs.sets[y == kBottom ? t.classes.size() : static_cast<size_t>(y)].push_back(a);
    }
    for (auto& s : fs.sets) std::sort(s.begin(), s.end());
    return fs;
}

FeedbackSet build_feedback(const Theory& t) { return build_feedback(t, t.space.enumerate()); }

std::string serialize_feedback(const FeedbackSet& fs) {
    std::ostringstream out;
    for (size_t s = 0; s < fs.labels.size(); ++s) {
        out << "class " << fs.labels[s] << ":\n";
        for (const auto& a : fs.sets[s]) {
            for (size_t f = 0; f < a.v.size(); ++f)
                out << (f ? "," : "") << fs.space.domains[f][a.v[f]];
            out << "\n";
        }
    }
    return out.str();
}

FeedbackSet parse_feedback(const std::string& text, const FeatureSpace& space) {
    FeedbackSet fs;
    fs.space = space;
    std::istringstream in(text);
    std::string line;
    size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("class ", 0) == 0) {
            const auto colon = line.find(':');
            if (colon == std::string::npos) fail_at("feedback", ln, "expected 'class <label>:'");
            const auto toks = split_ws(line.substr(6, colon - 6));
            if (toks.size() != 1) fail_at("feedback", ln, "expected one label");
            fs.labels.push_back(toks[0]);
            fs.sets.emplace_back();
        } else {
            if (fs.labels.empty()) fail_at("feedback", ln, "assignment before any class header");
            const auto ids = split_commas(line);
            if (ids.size() != space.num_features()) fail_at("feedback", ln, "arity mismatch");
            Assignment a;
            for (size_t f = 0; f < ids.size(); ++f) {
                const int vi = space.value_index(f, ids[f]);
                if (vi < 0) fail_at("feedback", ln, "value '" + ids[f] + "' outside domain");
                a.v.push_back(static_cast<uint8_t>(vi));
            }
            fs.sets.back().push_back(std::move(a));
        }
    }
    for (auto& s : fs.sets) std::sort(s.begin(), s.end());
    return fs;
}

FeedbackSet load_feedback(const std::string& path, const FeatureSpace& space) {
    return parse_feedback(read_file(path), space);
}

void save_feedback(const std::string& path, const FeedbackSet& fs) {
    write_file(path, serialize_feedback(fs));
}

}  // namespace nesy
