#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedseg/tensor.hpp"

namespace fedseg {

// Ordered, named collection of tensors. This is the unit FedAvg averages and
// the transport ships; the canonical flat layout is the concatenation of all
// tensors in declaration order.
template <typename S>
struct ParamsT {
    std::vector<std::pair<std::string, TensorT<S>>> items;

    void add(const std::string& name, TensorT<S> t) {
        for (const auto& [n, _] : items)
            if (n == name) throw std::invalid_argument("params: duplicate name " + name);
        items.emplace_back(name, std::move(t));
    }

    size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }

    TensorT<S>& tensor(size_t i) { return items[i].second; }
    const TensorT<S>& tensor(size_t i) const { return items[i].second; }
    const std::string& name(size_t i) const { return items[i].first; }

    TensorT<S>* find(const std::string& name) {
        for (auto& [n, t] : items)
            if (n == name) return &t;
        return nullptr;
    }
    const TensorT<S>* find(const std::string& name) const {
        return const_cast<ParamsT*>(this)->find(name);
    }

    // Two collections are aggregable iff layouts (names, order, shapes) match.
    bool layout_matches(const ParamsT& other) const {
        if (items.size() != other.items.size()) return false;
        for (size_t i = 0; i < items.size(); ++i) {
            if (items[i].first != other.items[i].first) return false;
            if (items[i].second.shape != other.items[i].second.shape) return false;
        }
        return true;
    }

    int64_t total_values() const {
        int64_t n = 0;
        for (const auto& [_, t] : items) n += t.numel();
        return n;
    }

    std::vector<S> flatten() const {
        std::vector<S> flat;
        flat.reserve(static_cast<size_t>(total_values()));
        for (const auto& [_, t] : items)
            flat.insert(flat.end(), t.data.begin(), t.data.end());
        return flat;
    }

    // Rebuilds values from a flat vector; layout (names/shapes) is kept.
    void unflatten(const std::vector<S>& flat) {
        if (static_cast<int64_t>(flat.size()) != total_values())
            throw std::invalid_argument("params: flat size does not match layout");
        size_t pos = 0;
        for (auto& [_, t] : items) {
            std::copy(flat.begin() + pos, flat.begin() + pos + t.data.size(), t.data.begin());
            pos += t.data.size();
        }
    }

    // Same layout, all values zero.
    ParamsT zeros_like() const {
        ParamsT out;
        for (const auto& [n, t] : items)
            out.items.emplace_back(n, TensorT<S>(t.shape));
        return out;
    }

    template <typename T>
    ParamsT<T> cast() const {
        ParamsT<T> out;
        for (const auto& [n, t] : items)
            out.items.emplace_back(n, t.template cast<T>());
        return out;
    }

    bool operator==(const ParamsT& other) const {
        if (!layout_matches(other)) return false;
        for (size_t i = 0; i < items.size(); ++i)
            if (items[i].second.data != other.items[i].second.data) return false;
        return true;
    }
};

using ModelParams = ParamsT<float>;

} // namespace fedseg
