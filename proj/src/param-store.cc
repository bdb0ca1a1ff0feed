// src/param-store.cc

// Copyright 2026  mtcascade authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "mtcascade/param-store.h"

namespace mtcascade {

ParamStore::ParamStore(const ParamStore &other) { *this = other; }

ParamStore &ParamStore::operator=(const ParamStore &other) {
  if (this == &other) return *this;
  params_.clear();
  index_ = other.index_;
  for (const auto &p : other.params_)
    params_.push_back(std::make_unique<Parameter>(*p));
  return *this;
}

Parameter &ParamStore::Add(const std::string &name, Matrix init,
                           bool trainable) {
  if (index_.count(name))
    throw ConfigError("duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->first_moment = Matrix::Zero(init.rows(), init.cols());
  p->second_moment = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->trainable = trainable;
  p->index = static_cast<int32_t>(params_.size());
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter *ParamStore::Find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter *ParamStore::Find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter &ParamStore::Get(std::string_view name) {
  Parameter *p = Find(name);
  if (!p) throw GeometryError("no parameter named '" + std::string(name) + "'");
  return *p;
}

const Parameter &ParamStore::Get(std::string_view name) const {
  const Parameter *p = Find(name);
  if (!p) throw GeometryError("no parameter named '" + std::string(name) + "'");
  return *p;
}

void ParamStore::ZeroGrad() {
  for (auto &p : params_) p->grad.setZero();
}

size_t ParamStore::NumValues() const {
  size_t n = 0;
  for (const auto &p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

GradientBuffer::GradientBuffer(const ParamStore &store)
    : store_(&store), grads_(store.size()) {
  for (size_t i = 0; i < store.size(); ++i) {
    rows_.push_back(store.at(i).value.rows());
    cols_.push_back(store.at(i).value.cols());
  }
}

bool GradientBuffer::Owns(const Parameter &p) const {
  return p.index >= 0 && static_cast<size_t>(p.index) < store_->size() &&
         &store_->at(p.index) == &p;
}

Matrix &GradientBuffer::For(const Parameter &p) {
  if (!Owns(p)) throw Error("gradient buffer used with a foreign parameter");
  Matrix &g = grads_.at(p.index);
  if (g.size() == 0) g = Matrix::Zero(rows_[p.index], cols_[p.index]);
  return g;
}

void GradientBuffer::Clear() {
  for (auto &g : grads_) g.resize(0, 0);
}

void GradientBuffer::AddTo(ParamStore *store) const {
  for (size_t i = 0; i < grads_.size(); ++i)
    if (grads_[i].size() > 0) store->at(i).grad += grads_[i];
}

}  // namespace mtcascade
