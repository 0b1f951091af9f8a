#pragma once

// Transactions implied by an incorporation state: commercial revenue, the
// recursive royalty cascade along licensing chains and the one-time IP
// transfer payment.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "loophole/kernel.hpp"
#include "loophole/scenario.hpp"

namespace loophole::economy {

using kernel::Domain;
using kernel::EntityId;
using kernel::State;

enum class TransactionKind : std::uint8_t { commercial, royalty, transfer };

std::string_view transaction_kind_name(TransactionKind k);
std::optional<TransactionKind> transaction_kind_from(std::string_view name);

struct Transaction {
  int id = 0;
  int time = 0;
  EntityId sender = kernel::kMarket;  // kMarket for commercial revenue
  EntityId receiver = 0;
  Money amount = 0.0;
  TransactionKind kind = TransactionKind::commercial;

  bool operator==(const Transaction&) const = default;
};

// Owner change caused by a transferIP action at path position `step`.
struct TransferEvent {
  int step = 0;
  EntityId from = 0;
  EntityId to = 0;
};

// Compares IP ownership before and after a step.
std::optional<TransferEvent> transfer_event(const State& before, const State& after, int step);

// Market -> company, one per company based in a non-haven country that owns
// or rents an IP. Ids start at `first_id`.
std::vector<Transaction> commercial_transactions(const State& s, const Domain& d, int first_id = 0);

// One royalty per rentsIP(owner, renter, ip) edge, renter -> owner, of
// royalty_rate x (renter's commercial revenue attributed to ip + royalties the
// renter receives from its own licensees of ip). A company holding several
// IPs attributes its commercial revenue evenly. Throws ContractViolation on a
// licensing cycle.
std::vector<Transaction> royalty_transactions(const State& s, std::span<const Transaction> commercial,
                                              const Domain& d, int first_id = 0);

// New owner -> old owner at the scenario transfer price. More than one event
// is a ContractViolation.
std::optional<Transaction> transfer_transaction(std::span<const TransferEvent> events, const Domain& d,
                                                int id = 0);

// All transactions in id order: commercial, royalty, transfer.
std::vector<Transaction> transactions(const State& s, const Domain& d, std::span<const TransferEvent> events);

// Every non-haven scenario country hosts a company with commercial revenue.
bool is_multinationally_complete(const State& s, const Domain& d);

}  // namespace loophole::economy
