#include "hetbridge/storage/principals.hpp"

namespace hetbridge::storage {

std::optional<Principal> PrincipalTable::add(const std::string& name, const std::string& kind,
                                             const std::string& token_hash, Timestamp issued_at,
                                             Timestamp expires_at) {
  std::lock_guard lock(mu_);
  if (auto it = by_name_.find(name); it != by_name_.end()) {
    if (issued_at < by_id_.at(it->second).expires_at) return std::nullopt;
  }
  Principal p{next_id_++, name, kind, token_hash, issued_at, expires_at};
  by_id_[p.principal_id] = p;
  by_name_[name] = p.principal_id;
  by_token_hash_[token_hash] = p.principal_id;
  return p;
}

std::optional<Principal> PrincipalTable::find_by_token_hash(const std::string& token_hash) const {
  std::lock_guard lock(mu_);
  auto it = by_token_hash_.find(token_hash);
  if (it == by_token_hash_.end()) return std::nullopt;
  return by_id_.at(it->second);
}

std::size_t PrincipalTable::size() const {
  std::lock_guard lock(mu_);
  return by_id_.size();
}

}  // namespace hetbridge::storage
