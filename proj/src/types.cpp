#include "flip/types.hpp"

namespace flip {

namespace detail {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace detail

namespace {

void check_labels(const std::vector<std::string>& entities,
                  const std::vector<std::string>& timestamps, Index n, Index t,
                  const char* what) {
    detail::require(static_cast<Index>(entities.size()) == n,
                    std::string(what) + ": entity label count does not match rows");
    detail::require(static_cast<Index>(timestamps.size()) == t,
                    std::string(what) + ": timestamp count does not match columns");
    for (std::size_t k = 1; k < timestamps.size(); ++k)
        detail::require(timestamps[k - 1] < timestamps[k],
                        std::string(what) + ": timestamps must be strictly increasing (" +
                            timestamps[k - 1] + " !< " + timestamps[k] + ")");
}

}  // namespace

void PricePanel::validate() const {
    detail::require(open.rows() == close.rows() && open.cols() == close.cols(),
                    "PricePanel: open and close shapes differ");
    check_labels(entities, timestamps, n(), t(), "PricePanel");
    if (present.size() > 0)
        detail::require(present.rows() == n() && present.cols() == t(),
                        "PricePanel: presence mask shape mismatch");
    for (Index i = 0; i < n(); ++i)
        for (Index k = 0; k < t(); ++k) {
            if (present.size() > 0 && !present(i, k)) continue;
            if (!(open(i, k) > 0.0) || !(close(i, k) > 0.0))
                throw ValidationError("PricePanel: non-positive price for entity " +
                                      entities[static_cast<std::size_t>(i)] + " at " +
                                      timestamps[static_cast<std::size_t>(k)]);
        }
}

void SignPanel::validate() const {
    check_labels(entities, timestamps, n(), t(), "SignPanel");
    for (Index i = 0; i < n(); ++i)
        for (Index k = 0; k < t(); ++k)
            detail::require(signs(i, k) == 1 || signs(i, k) == -1,
                            "SignPanel: entries must be exactly -1 or +1");
}

void ReversalPanel::validate() const {
    check_labels(entities, timestamps, n(), t(), "ReversalPanel");
    for (Index i = 0; i < n(); ++i)
        for (Index k = 0; k < t(); ++k)
            detail::require(flips(i, k) == 0 || flips(i, k) == 1,
                            "ReversalPanel: entries must be 0 or 1");
}

}  // namespace flip
