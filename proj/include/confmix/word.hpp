#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confmix {

// Symbols are stored 0-based; the text form of a word is 1-based ("12" is
// the word phi_1 phi_2).
using Symbol = std::uint8_t;

inline constexpr int kMaxAlphabet = 64;

class FiniteWord {
public:
    FiniteWord() = default;
    explicit FiniteWord(std::vector<Symbol> symbols) : symbols_(std::move(symbols)) {}
    FiniteWord(std::initializer_list<int> one_based);

    // Accepts "12", "1 2" or "1,2"; digits are 1-based symbols. Multi-digit
    // symbols need separators.
    static FiniteWord parse(std::string_view text);

    std::size_t size() const { return symbols_.size(); }
    bool empty() const { return symbols_.empty(); }
    Symbol operator[](std::size_t i) const { return symbols_[i]; }
    std::span<const Symbol> symbols() const { return symbols_; }
    const std::vector<Symbol>& vec() const { return symbols_; }

    void push_back(Symbol s) { symbols_.push_back(s); }
    void pop_back() { symbols_.pop_back(); }
    FiniteWord concat(const FiniteWord& other) const;
    FiniteWord prefix(std::size_t n) const;
    FiniteWord drop(std::size_t n) const;
    bool is_prefix_of(const FiniteWord& other) const;

    // Throws std::invalid_argument if a symbol is outside 0..m-1.
    void validate(int alphabet) const;

    std::string to_string() const;

    // Base-m index of the word among words of the same length (first symbol
    // most significant). Requires m^size to fit in 64 bits.
    std::uint64_t index(int alphabet) const;
    static FiniteWord from_index(std::uint64_t index, std::size_t length, int alphabet);

    friend bool operator==(const FiniteWord&, const FiniteWord&) = default;
    friend auto operator<=>(const FiniteWord&, const FiniteWord&) = default;

private:
    std::vector<Symbol> symbols_;
};

// Source of symbols for a random tail. Copies of a stream clone the source,
// so a copy reproduces the same continuation.
class TailSource {
public:
    virtual ~TailSource() = default;
    virtual Symbol next() = 0;
    virtual std::unique_ptr<TailSource> clone() const = 0;
};

class SymbolStream {
public:
    static SymbolStream periodic(int alphabet, FiniteWord prefix, FiniteWord period);
    static SymbolStream constant(int alphabet, Symbol s);
    static SymbolStream random(int alphabet, FiniteWord prefix, std::unique_ptr<TailSource> tail);

    SymbolStream(const SymbolStream& other);
    SymbolStream& operator=(const SymbolStream& other);
    SymbolStream(SymbolStream&&) noexcept = default;
    SymbolStream& operator=(SymbolStream&&) noexcept = default;

    int alphabet() const { return alphabet_; }
    bool is_periodic() const { return !tail_; }

    // i-th symbol (0-based position). Materializes random symbols on demand.
    Symbol at(std::size_t i);
    FiniteWord read(std::size_t n);
    // Fills `out` with the first out.size() symbols.
    void read_into(std::span<Symbol> out);

    void shift(std::size_t count = 1);
    SymbolStream shifted(std::size_t count = 1) const;

    // Only meaningful for periodic streams.
    std::size_t prefix_length() const { return buffer_.size() - head_; }
    std::size_t period_length() const { return period_.size(); }

private:
    SymbolStream() = default;

    int alphabet_ = 0;
    std::vector<Symbol> buffer_;   // prefix (periodic) or materialized symbols (random)
    std::size_t head_ = 0;
    std::vector<Symbol> period_;
    std::size_t phase_ = 0;
    std::unique_ptr<TailSource> tail_;
};

// Common prefix length of two streams, capped at `limit`.
std::size_t common_prefix(SymbolStream& a, SymbolStream& b, std::size_t limit);

// m^{-k} where k is the common prefix length. Returns 0 when both streams are
// periodic and equal; m^{-max_depth} when they agree through max_depth but
// equality cannot be decided.
double symbolic_dist(const SymbolStream& a, const SymbolStream& b, std::size_t max_depth);

}  // namespace confmix
