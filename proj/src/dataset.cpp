#include "nesy/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nesy {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("dataset: " + msg); }

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

const char* order_name(int8_t o) {
    switch (o) {
        case 0: return "train";
        case 1: return "same";
        default: return "swap";
    }
}

int8_t order_code(const std::string& s) {
    if (s == "train") return 0;
    if (s == "same") return 1;
    if (s == "swap") return 2;
    fail("bad order flag '" + s + "'");
}

}  // namespace

uint64_t Dataset::content_hash() const {
    uint64_t h = fnv1a(data.data(), data.size() * sizeof(float));
    h = fnv1a(label.data(), label.size() * sizeof(int), h);
    for (const auto& a : truth) h = fnv1a(a.v.data(), a.v.size(), h);
    h = fnv1a(order.data(), order.size(), h);
    return h;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ostringstream meta;
    meta << "domain: " << ds.domain << "\n";
    meta << "n: " << ds.n << "\n";
    meta << "item: " << ds.c << " " << ds.h << " " << ds.w << "\n";
    meta << "scaling: " << ds.scaling << "\n";
    meta << "sigma: " << ds.sigma << "\n";
    meta << "seed: " << ds.seed << "\n";
    meta << "stream_hash: " << ds.stream_hash << "\n";
    meta << "classes:";
    for (const auto& c : ds.classes) meta << " " << c;
    meta << "\n";
    meta << "features: " << ds.space.num_features() << "\n";
    for (size_t f = 0; f < ds.space.num_features(); ++f) {
        meta << "domain " << (f + 1) << ":";
        for (const auto& v : ds.space.domains[f]) meta << " " << v;
        meta << "\n";
    }
    std::ofstream mf(fs::path(dir) / "meta", std::ios::binary);
    if (!mf) fail("cannot write meta in " + dir);
    mf << meta.str();

    const char* bin = ds.domain == "chess" ? "images.bin" : "series.bin";
    std::ofstream bf(fs::path(dir) / bin, std::ios::binary);
    bf.write(reinterpret_cast<const char*>(ds.data.data()),
             static_cast<std::streamsize>(ds.data.size() * sizeof(float)));
    if (!bf) fail("cannot write " + std::string(bin));

    std::ofstream lf(fs::path(dir) / "labels.csv", std::ios::binary);
    lf << "class";
    for (const auto& f : ds.space.features) lf << "," << f;
    if (ds.domain == "ts") lf << ",order";
    lf << "\n";
    for (int i = 0; i < ds.n; ++i) {
        lf << ds.classes[ds.label[i]];
        for (size_t f = 0; f < ds.truth[i].v.size(); ++f)
            lf << "," << ds.space.domains[f][ds.truth[i].v[f]];
        if (ds.domain == "ts") lf << "," << order_name(ds.order[i]);
        lf << "\n";
    }
    if (!lf) fail("cannot write labels.csv");
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;

    std::ifstream mf(fs::path(dir) / "meta", std::ios::binary);
    if (!mf) fail("cannot open meta in " + dir);
    std::string line;
    std::vector<std::vector<std::string>> domains;
    size_t nfeat = 0;
    while (std::getline(mf, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) fail("bad meta line '" + line + "'");
        const std::string key = line.substr(0, colon);
        std::istringstream rest(line.substr(colon + 1));
        if (key == "domain") rest >> ds.domain;
        else if (key == "n") rest >> ds.n;
        else if (key == "item") rest >> ds.c >> ds.h >> ds.w;
        else if (key == "scaling") rest >> ds.scaling;
        else if (key == "sigma") rest >> ds.sigma;
        else if (key == "seed") rest >> ds.seed;
        else if (key == "stream_hash") rest >> ds.stream_hash;
        else if (key == "classes") {
            std::string c;
            while (rest >> c) ds.classes.push_back(c);
        } else if (key == "features") {
            rest >> nfeat;
        } else if (key.rfind("domain ", 0) == 0) {
            std::vector<std::string> vals;
            std::string v;
            while (rest >> v) vals.push_back(v);
            domains.push_back(std::move(vals));
        } else {
            fail("unknown meta key '" + key + "'");
        }
    }
    if (domains.size() != nfeat) fail("meta domain count mismatch");
    ds.space = make_space(domains);

    const char* bin = ds.domain == "chess" ? "images.bin" : "series.bin";
    std::ifstream bf(fs::path(dir) / bin, std::ios::binary);
    if (!bf) fail("cannot open " + std::string(bin));
    ds.data.resize(static_cast<size_t>(ds.n) * ds.item_size());
    bf.read(reinterpret_cast<char*>(ds.data.data()),
            static_cast<std::streamsize>(ds.data.size() * sizeof(float)));
    if (bf.gcount() != static_cast<std::streamsize>(ds.data.size() * sizeof(float)))
        fail("truncated " + std::string(bin));

    std::ifstream lf(fs::path(dir) / "labels.csv", std::ios::binary);
    if (!lf) fail("cannot open labels.csv");
    std::getline(lf, line);  // header
    while (std::getline(lf, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_on(line, ',');
        const size_t want = 1 + nfeat + (ds.domain == "ts" ? 1 : 0);
        if (cells.size() != want) fail("labels.csv arity mismatch");
        int cls = -1;
        for (size_t c = 0; c < ds.classes.size(); ++c)
            if (ds.classes[c] == cells[0]) cls = static_cast<int>(c);
        if (cls < 0) fail("labels.csv unknown class '" + cells[0] + "'");
        ds.label.push_back(cls);
        Assignment a;
        for (size_t f = 0; f < nfeat; ++f) {
            const int vi = ds.space.value_index(f, cells[1 + f]);
            if (vi < 0) fail("labels.csv value outside domain");
            a.v.push_back(static_cast<uint8_t>(vi));
        }
        ds.truth.push_back(std::move(a));
        ds.order.push_back(ds.domain == "ts" ? order_code(cells[1 + nfeat]) : int8_t{0});
    }
    if (static_cast<int>(ds.label.size()) != ds.n) fail("labels.csv row count mismatch");
    return ds;
}

}  // namespace nesy
