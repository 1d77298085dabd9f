#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgdf/core/tensor.hpp"

namespace sgdf::ad {

// Named learnable tensors with matching gradient buffers. Parameter ids are
// assigned in registration order, so building the same model twice (any
// scalar type) yields identical ids and names.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> grad;
    };

    int add(const std::string& name, Tensor<T> init) {
        if (index_.count(name))
            throw std::invalid_argument("duplicate parameter name: " + name);
        const int id = static_cast<int>(entries_.size());
        Entry e;
        e.name = name;
        e.grad = Tensor<T>(init.shape());
        e.value = std::move(init);
        entries_.push_back(std::move(e));
        index_[name] = id;
        return id;
    }

    int size() const { return static_cast<int>(entries_.size()); }
    Entry& entry(int id) { return entries_.at(static_cast<std::size_t>(id)); }
    const Entry& entry(int id) const { return entries_.at(static_cast<std::size_t>(id)); }
    Tensor<T>& value(int id) { return entry(id).value; }
    const Tensor<T>& value(int id) const { return entry(id).value; }
    Tensor<T>& grad(int id) { return entry(id).grad; }
    const std::string& name(int id) const { return entry(id).name; }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    void zero_grad() {
        for (auto& e : entries_) e.grad.zero();
    }

    std::size_t total_params() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
        return out;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

// Registers parameters under a dotted prefix with the project's init policy:
// Kaiming-uniform fan-in for conv weights, zeros for biases, zeros for the
// closing conv of residual branches.
template <typename T>
class ParamBuilder {
public:
    ParamBuilder(ParamStore<T>& store, std::mt19937_64& rng, std::string prefix = "")
        : store_(&store), rng_(&rng), prefix_(std::move(prefix)) {}

    ParamBuilder scoped(const std::string& sub) const {
        return ParamBuilder(*store_, *rng_, prefix_.empty() ? sub : prefix_ + "." + sub);
    }

    // Conv weight packed as (kh*kw, cin, cout), matching the im2col GEMM layout.
    int conv_weight(const std::string& name, int kh, int kw, int cin, int cout,
                    bool zero_init = false) {
        Tensor<T> w(Shape{kh * kw, cin, cout});
        if (!zero_init) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(kh) * kw * cin);
            std::uniform_real_distribution<double> uni(-bound, bound);
            for (auto& x : w.vec()) x = static_cast<T>(uni(*rng_));
        }
        return store_->add(qualify(name), std::move(w));
    }

    int bias(const std::string& name, int cout) {
        return store_->add(qualify(name), Tensor<T>(Shape{1, 1, cout}));
    }

    int vector_param(const std::string& name, int c, T init_value) {
        Tensor<T> v(Shape{1, 1, c});
        v.fill(init_value);
        return store_->add(qualify(name), std::move(v));
    }

private:
    std::string qualify(const std::string& name) const {
        return prefix_.empty() ? name : prefix_ + "." + name;
    }

    ParamStore<T>* store_;
    std::mt19937_64* rng_;
    std::string prefix_;
};

}  // namespace sgdf::ad
