#include "nesy/chess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nesy {

namespace {

int sq(int x, int y) { return (y - 1) * 3 + (x - 1); }

void check_board(const Board& b) {
    if (b.pieces[0].code != kBK) throw std::runtime_error("board: pieces[0] must be the black king");
    if (b.pieces[1].code == b.pieces[2].code)
        throw std::runtime_error("board: white codes must differ");
    for (const auto& p : b.pieces) {
        if (p.code < kBK || p.code > kWQ) throw std::runtime_error("board: bad piece code");
        if (p.x < 1 || p.x > 3 || p.y < 1 || p.y > 3) throw std::runtime_error("board: bad square");
    }
    for (int i = 1; i < 3; ++i) {
        if (b.pieces[i].code == kBK) throw std::runtime_error("board: extra black king");
        for (int j = 0; j < i; ++j)
            if (b.pieces[i].x == b.pieces[j].x && b.pieces[i].y == b.pieces[j].y)
                throw std::runtime_error("board: squares must be distinct");
    }
}

// does a white piece at (fx,fy) attack (tx,ty)? `occ` holds blocker squares
// (attacker and target excluded by the caller)
bool attacks(int code, int fx, int fy, int tx, int ty, uint16_t occ) {
    const int dx = tx - fx, dy = ty - fy;
    if (dx == 0 && dy == 0) return false;
    const int ax = std::abs(dx), ay = std::abs(dy);
    const auto path_clear = [&] {
        // on a 3x3 board at most one square lies strictly between
        if (std::max(ax, ay) < 2) return true;
        return (occ & (1u << sq(fx + dx / 2, fy + dy / 2))) == 0;
    };
    switch (code) {
        case kWK: return std::max(ax, ay) == 1;
        case kWN: return (ax == 1 && ay == 2) || (ax == 2 && ay == 1);
        case kWP: return dy == 1 && ax == 1;
        case kWR: return (dx == 0 || dy == 0) && path_clear();
        case kWB: return ax == ay && path_clear();
        case kWQ: return (dx == 0 || dy == 0 || ax == ay) && path_clear();
        default: return false;
    }
}

}  // namespace

bool black_in_check(const Board& b) {
    const auto& bk = b.pieces[0];
    for (int i = 1; i < 3; ++i) {
        const auto& w = b.pieces[i];
        const auto& o = b.pieces[3 - i];  // the other white is the only possible blocker
        const uint16_t occ = static_cast<uint16_t>(1u << sq(o.x, o.y));
        if (attacks(w.code, w.x, w.y, bk.x, bk.y, occ)) return true;
    }
    return false;
}

int count_legal_bk_moves(const Board& b) {
    const auto& bk = b.pieces[0];
    int legal = 0;
    for (int ny = bk.y - 1; ny <= bk.y + 1; ++ny) {
        for (int nx = bk.x - 1; nx <= bk.x + 1; ++nx) {
            if (nx < 1 || nx > 3 || ny < 1 || ny > 3) continue;
            if (nx == bk.x && ny == bk.y) continue;
            int captured = 0;
            if (b.pieces[1].x == nx && b.pieces[1].y == ny) captured = 1;
            if (b.pieces[2].x == nx && b.pieces[2].y == ny) captured = 2;
            bool attacked = false;
            for (int i = 1; i < 3; ++i) {
                if (i == captured) continue;
                const auto& w = b.pieces[i];
                if (w.x == nx && w.y == ny) continue;  // attacker occupies the target itself
                // the king has left its origin square (x-ray applies); the
                // other white blocks unless it was just captured
                uint16_t occ = 0;
                const auto& o = b.pieces[3 - i];
                if (3 - i != captured && !(o.x == nx && o.y == ny))
                    occ = static_cast<uint16_t>(1u << sq(o.x, o.y));
                if (attacks(w.code, w.x, w.y, nx, ny, occ)) {
                    attacked = true;
                    break;
                }
            }
            if (!attacked) ++legal;
        }
    }
    return legal;
}

ChessLabel classify_board(const Board& b) {
    check_board(b);
    const auto& bk = b.pieces[0];
    for (int i = 1; i < 3; ++i) {
        const auto& w = b.pieces[i];
        if (w.code == kWK &&
            std::max(std::abs(w.x - bk.x), std::abs(w.y - bk.y)) == 1)
            return ChessLabel::Illegal;
    }
    const bool check = black_in_check(b);
    const bool can_move = count_legal_bk_moves(b) > 0;
    if (check) return can_move ? ChessLabel::Illegal : ChessLabel::Mate;
    return can_move ? ChessLabel::Safe : ChessLabel::Draw;
}

std::vector<Board> enumerate_boards() {
    static const int whites[6] = {kWR, kWB, kWN, kWK, kWP, kWQ};
    std::vector<Board> out;
    out.reserve(7560);
    for (int bks = 0; bks < 9; ++bks) {
        for (int s1 = 0; s1 < 9; ++s1) {
            if (s1 == bks) continue;
            for (int s2 = s1 + 1; s2 < 9; ++s2) {
                if (s2 == bks) continue;
                for (int c1 : whites) {
                    for (int c2 : whites) {
                        if (c1 == c2) continue;
                        Board b;
                        b.pieces[0] = {kBK, bks % 3 + 1, bks / 3 + 1};
                        b.pieces[1] = {c1, s1 % 3 + 1, s1 / 3 + 1};
                        b.pieces[2] = {c2, s2 % 3 + 1, s2 / 3 + 1};
                        out.push_back(b);
                    }
                }
            }
        }
    }
    return out;
}

FeatureSpace chess_space() {
    std::vector<std::string> codes;
    for (int v = 0; v <= 7; ++v) codes.push_back(std::to_string(v));
    return make_space(std::vector<std::vector<std::string>>(9, codes));
}

Assignment board_to_assignment(const Board& b) {
    Assignment a;
    a.v.assign(9, kEmpty);
    for (const auto& p : b.pieces) a.v[sq(p.x, p.y)] = static_cast<uint8_t>(p.code);
    return a;
}

Board assignment_to_board(const Assignment& a) {
    Board b;
    int next = 1;
    bool have_bk = false;
    for (int s = 0; s < 9; ++s) {
        const int code = a.v[s];
        if (code == kEmpty) continue;
        const Piece p{code, s % 3 + 1, s / 3 + 1};
        if (code == kBK) {
            if (have_bk) throw std::runtime_error("assignment: two black kings");
            b.pieces[0] = p;
            have_bk = true;
        } else {
            if (next > 2) throw std::runtime_error("assignment: more than three pieces");
            b.pieces[next++] = p;
        }
    }
    if (!have_bk || next != 3) throw std::runtime_error("assignment: not a board");
    check_board(b);
    return b;
}

Theory chess_theory() {
    Theory t;
    t.space = chess_space();
    t.classes = {"safe", "draw", "mate"};
    t.bottom = "illegal";
    t.defs.assign(3, {});
    for (const auto& b : enumerate_boards()) {
        const ChessLabel y = classify_board(b);
        if (y != ChessLabel::Illegal)
            t.defs[static_cast<size_t>(y)].push_back(board_to_assignment(b));
    }
    canonicalize(t);
    return t;
}

FeedbackSet build_chess_feedback() {
    std::vector<Assignment> all;
    all.reserve(7560);
    for (const auto& b : enumerate_boards()) all.push_back(board_to_assignment(b));
    return build_feedback(chess_theory(), all);
}

namespace {

// one 28x28 glyph; family selects the rendered figure, jitter comes from rng
std::vector<float> render_glyph(int family, Rng& rng) {
    const float cx = 13.5f + static_cast<float>(rng.uniform(-2.0, 2.0));
    const float cy = 13.5f + static_cast<float>(rng.uniform(-2.0, 2.0));
    const float r = 9.0f * static_cast<float>(rng.uniform(0.85, 1.15));
    const float ink = static_cast<float>(rng.uniform(0.75, 1.0));
    const float wline = 2.0f;

    const auto inside = [&](float px, float py) -> bool {
        const float dx = px - cx, dy = py - cy;
        const float adx = std::fabs(dx), ady = std::fabs(dy);
        const float rad = std::sqrt(dx * dx + dy * dy);
        switch (family) {
            case 0: return std::fabs(rad - r) < wline;                      // ring
            case 1: return rad < r * 0.8f;                                  // disk
            case 2:                                                         // two bars
                return adx < r && (std::fabs(dy - r * 0.5f) < wline || std::fabs(dy + r * 0.5f) < wline);
            case 3: return adx < r && ady < r &&                            // X
                           (std::fabs(dx - dy) < wline || std::fabs(dx + dy) < wline);
            case 4: return (adx < wline && ady < r) || (ady < wline && adx < r);  // plus
            case 5: {                                                       // square outline
                const float m = std::max(adx, ady);
                return m < r && m > r - wline;
            }
            case 6: return adx < wline && ady < r;                          // vertical bar
            case 7: return dy > -r * 0.7f && dy < r * 0.9f - 1.8f * adx;    // triangle
            default: return false;
        }
    };

    std::vector<float> img(28 * 28);
    for (int y = 0; y < 28; ++y) {
        for (int x = 0; x < 28; ++x) {
            // 2x2 supersampling softens edges a little
            int hits = 0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx)
                    if (inside(x + 0.25f + 0.5f * sx, y + 0.25f + 0.5f * sy)) ++hits;
            float v = ink * (hits / 4.0f) + static_cast<float>(rng.uniform(0.0, 0.05));
            img[y * 28 + x] = std::min(1.0f, std::max(0.0f, v));
        }
    }
    return img;
}

uint32_t read_be32(std::ifstream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("idx: truncated ") + what);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

}  // namespace

GlyphSource synthetic_glyphs(Rng& rng, int per_code) {
    GlyphSource g;
    for (int code = 0; code < 8; ++code)
        for (int i = 0; i < per_code; ++i) g.pools[code].push_back(render_glyph(code, rng));
    return g;
}

GlyphSource load_glyphs_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
    if (read_be32(imgs, "image magic") != 2051) throw std::runtime_error("idx: bad image magic");
    const uint32_t n = read_be32(imgs, "image count");
    const uint32_t rows = read_be32(imgs, "rows");
    const uint32_t cols = read_be32(imgs, "cols");
    if (rows != 28 || cols != 28) throw std::runtime_error("idx: expected 28x28 images");

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be32(labs, "label magic") != 2049) throw std::runtime_error("idx: bad label magic");
    if (read_be32(labs, "label count") != n) throw std::runtime_error("idx: image/label count mismatch");

    std::vector<unsigned char> pix(784);
    GlyphSource g;
    for (uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(pix.data()), 784))
            throw std::runtime_error("idx: truncated image data");
        char lab;
        if (!labs.read(&lab, 1)) throw std::runtime_error("idx: truncated label data");
        if (lab < 0 || lab > 7) continue;  // digits 8/9 have no piece mapping
        std::vector<float> img(784);
        for (int p = 0; p < 784; ++p) img[p] = pix[p] / 255.0f;
        g.pools[static_cast<int>(lab)].push_back(std::move(img));
    }
    for (int code = 0; code < 8; ++code)
        if (g.pools[code].empty())
            throw std::runtime_error("idx: empty pool for code " + std::to_string(code));
    return g;
}

Dataset generate_chess_dataset(int n, const GlyphSource& glyphs, const FeedbackSet& fb, Rng& rng) {
    if (n < 1) throw std::runtime_error("chess dataset: n must be >= 1");
    for (const auto& pool : glyphs.pools)
        if (pool.empty()) throw std::runtime_error("chess dataset: empty glyph pool");

    Dataset ds;
    ds.n = n;
    ds.c = 1;
    ds.h = ds.w = 84;
    ds.space = fb.space;
    ds.classes = {fb.labels.begin(), fb.labels.end() - 1};  // bottom never labels data
    ds.domain = "chess";
    ds.scaling = "minmax";
    ds.data.resize(static_cast<size_t>(n) * 84 * 84);
    ds.order.assign(n, 0);

    // equal class counts (remainder to the earlier classes), then shuffled
    const int ncls = static_cast<int>(ds.classes.size());
    for (int i = 0; i < n; ++i) ds.label.push_back(i % ncls);
    rng.shuffle(ds.label);

    for (int i = 0; i < n; ++i) {
        const auto& pool = fb.sets[ds.label[i]];
        if (pool.empty()) throw std::runtime_error("chess dataset: class has no boards");
        const Assignment& a = pool[rng.uniform_index(pool.size())];
        ds.truth.push_back(a);

        float* img = ds.item(i);
        for (int s = 0; s < 9; ++s) {
            const auto& gp = glyphs.pools[a.v[s]];
            const auto& glyph = gp[rng.uniform_index(gp.size())];
            // square (x,y) with y=1 at the bottom goes to cell row 3-y of the image
            const int px = (s % 3) * 28;
            const int py = (2 - s / 3) * 28;
            for (int r = 0; r < 28; ++r)
                std::memcpy(img + (py + r) * 84 + px, glyph.data() + r * 28, 28 * sizeof(float));
        }
        float lo = img[0], hi = img[0];
        for (int p = 1; p < 84 * 84; ++p) {
            lo = std::min(lo, img[p]);
            hi = std::max(hi, img[p]);
        }
        const float span = hi - lo;
        for (int p = 0; p < 84 * 84; ++p)
            img[p] = span > 0 ? (img[p] - lo) / span - 0.5f : 0.0f;
    }
    return ds;
}

std::array<Piece, 3> corrupt_pieces(const Board& b, double alpha, Rng& rng) {
    if (alpha < 0.0 || alpha > 1.0) throw std::runtime_error("corrupt: alpha out of range");
    std::array<Piece, 3> out = b.pieces;
    for (auto& p : out) {
        if (rng.uniform() < alpha) {
            // resample the code among the other six piece identities
            int k = 1 + static_cast<int>(rng.uniform_index(6));
            if (k >= p.code) ++k;
            p.code = k;
        }
        if (rng.uniform() < alpha) {
            int k = 1 + static_cast<int>(rng.uniform_index(2));
            if (k >= p.x) ++k;
            p.x = k;
        }
        if (rng.uniform() < alpha) {
            int k = 1 + static_cast<int>(rng.uniform_index(2));
            if (k >= p.y) ++k;
            p.y = k;
        }
    }
    return out;
}

Assignment pieces_to_assignment(const std::array<Piece, 3>& pieces) {
    Assignment a;
    a.v.assign(9, kEmpty);
    for (const auto& p : pieces) a.v[sq(p.x, p.y)] = static_cast<uint8_t>(p.code);
    return a;
}

}  // namespace nesy
