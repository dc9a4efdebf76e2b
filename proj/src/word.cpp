#include "confmix/word.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace confmix {

FiniteWord::FiniteWord(std::initializer_list<int> one_based) {
    symbols_.reserve(one_based.size());
    for (int s : one_based) {
        if (s < 1 || s > kMaxAlphabet) throw std::invalid_argument("symbol out of range");
        symbols_.push_back(static_cast<Symbol>(s - 1));
    }
}

FiniteWord FiniteWord::parse(std::string_view text) {
    std::vector<Symbol> out;
    bool separated = text.find_first_of(" ,") != std::string_view::npos;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == ' ' || c == ',') {
            ++i;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw std::invalid_argument("word text contains a non-digit: " + std::string(text));
        }
        int value = 0;
        if (separated) {
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
                value = value * 10 + (text[i] - '0');
                ++i;
            }
        } else {
            value = c - '0';
            ++i;
        }
        if (value < 1 || value > kMaxAlphabet) {
            throw std::invalid_argument("symbol out of range in word: " + std::string(text));
        }
        out.push_back(static_cast<Symbol>(value - 1));
    }
    return FiniteWord(std::move(out));
}

FiniteWord FiniteWord::concat(const FiniteWord& other) const {
    std::vector<Symbol> out(symbols_);
    out.insert(out.end(), other.symbols_.begin(), other.symbols_.end());
    return FiniteWord(std::move(out));
}

FiniteWord FiniteWord::prefix(std::size_t n) const {
    n = std::min(n, symbols_.size());
    return FiniteWord(std::vector<Symbol>(symbols_.begin(), symbols_.begin() + n));
}

FiniteWord FiniteWord::drop(std::size_t n) const {
    n = std::min(n, symbols_.size());
    return FiniteWord(std::vector<Symbol>(symbols_.begin() + n, symbols_.end()));
}

bool FiniteWord::is_prefix_of(const FiniteWord& other) const {
    if (size() > other.size()) return false;
    return std::equal(symbols_.begin(), symbols_.end(), other.symbols_.begin());
}

void FiniteWord::validate(int alphabet) const {
    for (Symbol s : symbols_) {
        if (s >= alphabet) {
            throw std::invalid_argument("word " + to_string() + " uses a symbol outside alphabet of size " +
                                        std::to_string(alphabet));
        }
    }
}

std::string FiniteWord::to_string() const {
    bool wide = false;
    for (Symbol s : symbols_) wide = wide || s >= 9;
    std::string out;
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
        if (wide && i > 0) out += ' ';
        out += std::to_string(symbols_[i] + 1);
    }
    return out;
}

std::uint64_t FiniteWord::index(int alphabet) const {
    std::uint64_t idx = 0;
    for (Symbol s : symbols_) idx = idx * static_cast<std::uint64_t>(alphabet) + s;
    return idx;
}

FiniteWord FiniteWord::from_index(std::uint64_t index, std::size_t length, int alphabet) {
    std::vector<Symbol> out(length);
    for (std::size_t i = length; i-- > 0;) {
        out[i] = static_cast<Symbol>(index % static_cast<std::uint64_t>(alphabet));
        index /= static_cast<std::uint64_t>(alphabet);
    }
    return FiniteWord(std::move(out));
}

SymbolStream SymbolStream::periodic(int alphabet, FiniteWord prefix, FiniteWord period) {
    if (alphabet < 1 || alphabet > kMaxAlphabet) throw std::invalid_argument("alphabet size out of range");
    if (period.empty()) throw std::invalid_argument("periodic stream needs a nonempty period");
    prefix.validate(alphabet);
    period.validate(alphabet);
    SymbolStream s;
    s.alphabet_ = alphabet;
    s.buffer_ = prefix.vec();
    s.period_ = period.vec();
    return s;
}

SymbolStream SymbolStream::constant(int alphabet, Symbol symbol) {
    return periodic(alphabet, FiniteWord(), FiniteWord(std::vector<Symbol>{symbol}));
}

SymbolStream SymbolStream::random(int alphabet, FiniteWord prefix, std::unique_ptr<TailSource> tail) {
    if (alphabet < 1 || alphabet > kMaxAlphabet) throw std::invalid_argument("alphabet size out of range");
    if (!tail) throw std::invalid_argument("random stream needs a tail source");
    prefix.validate(alphabet);
    SymbolStream s;
    s.alphabet_ = alphabet;
    s.buffer_ = prefix.vec();
    s.tail_ = std::move(tail);
    return s;
}

SymbolStream::SymbolStream(const SymbolStream& other)
    : alphabet_(other.alphabet_),
      buffer_(other.buffer_),
      head_(other.head_),
      period_(other.period_),
      phase_(other.phase_),
      tail_(other.tail_ ? other.tail_->clone() : nullptr) {}

SymbolStream& SymbolStream::operator=(const SymbolStream& other) {
    if (this != &other) {
        SymbolStream copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Symbol SymbolStream::at(std::size_t i) {
    std::size_t pos = head_ + i;
    if (pos < buffer_.size()) return buffer_[pos];
    if (tail_) {
        while (buffer_.size() <= pos) buffer_.push_back(tail_->next());
        return buffer_[pos];
    }
    std::size_t k = pos - buffer_.size();
    return period_[(phase_ + k) % period_.size()];
}

FiniteWord SymbolStream::read(std::size_t n) {
    std::vector<Symbol> out(n);
    read_into(out);
    return FiniteWord(std::move(out));
}

void SymbolStream::read_into(std::span<Symbol> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i);
}

void SymbolStream::shift(std::size_t count) {
    for (std::size_t c = 0; c < count; ++c) {
        if (head_ < buffer_.size()) {
            ++head_;
        } else if (tail_) {
            at(0);
            ++head_;
        } else {
            phase_ = (phase_ + 1) % period_.size();
        }
    }
    // Keep the consumed part of the buffer bounded.
    if (head_ > 4096 && head_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
    }
}

SymbolStream SymbolStream::shifted(std::size_t count) const {
    SymbolStream copy(*this);
    copy.shift(count);
    return copy;
}

std::size_t common_prefix(SymbolStream& a, SymbolStream& b, std::size_t limit) {
    std::size_t k = 0;
    while (k < limit && a.at(k) == b.at(k)) ++k;
    return k;
}

double symbolic_dist(const SymbolStream& a_in, const SymbolStream& b_in, std::size_t max_depth) {
    if (a_in.alphabet() != b_in.alphabet()) throw std::invalid_argument("streams over different alphabets");
    SymbolStream a(a_in);
    SymbolStream b(b_in);
    const double m = a.alphabet();
    if (a.is_periodic() && b.is_periodic()) {
        // Two eventually periodic streams that agree past both prefixes for a
        // common multiple of the periods agree forever.
        std::size_t bound = std::max(a.prefix_length(), b.prefix_length()) +
                            std::lcm(a.period_length(), b.period_length());
        std::size_t k = common_prefix(a, b, bound);
        if (k == bound) return 0.0;
        return std::pow(m, -static_cast<double>(k));
    }
    std::size_t k = common_prefix(a, b, max_depth);
    return std::pow(m, -static_cast<double>(k));
}

}  // namespace confmix
