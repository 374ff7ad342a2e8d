#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdpalloc/auction.hpp"
#include "mdpalloc/distributed.hpp"
#include "mdpalloc/privacy.hpp"

namespace mdpalloc {

using Json = nlohmann::ordered_json;

inline constexpr int kWireVersion = 1;

// Loaders throw ParseError on malformed or invalid documents.
Json to_json(const Mdp& mdp);
Mdp mdp_from_json(const Json& j);

Json to_json(const ConstrainedMdp& cmdp);
ConstrainedMdp cmdp_from_json(const Json& j);

Json to_json(const AuctionInstance& inst);
AuctionInstance auction_from_json(const Json& j);

// Wire messages. Infinite bounds are encoded as null.
Json to_json(const WorkerTask& task);
WorkerTask task_from_json(const Json& j);
Json to_json(const WorkerResponse& resp);
WorkerResponse response_from_json(const Json& j);

// The transform itself is never part of the document.
Json to_json(const EncryptedBid& bid);
EncryptedBid encrypted_bid_from_json(const Json& j);

Json to_json(const Policy& policy);
Json to_json(const AuditLog& log);
Json constrained_report(const ConstrainedSolution& sol);
Json allocation_report(const Allocation& alloc, const std::vector<double>* payments = nullptr);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace mdpalloc
