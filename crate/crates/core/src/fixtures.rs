//! Contracts shipped with the crate.

pub const BAKERY: &str = include_str!("../fixtures/bakery.json");
/// Bakery with the owner conflict removed and the compensation period
/// shortened to fit the limitation.
pub const BAKERY_REPAIRED: &str = include_str!("../fixtures/bakery_repaired.json");
/// Bakery where the payment has to precede the transfer, both due on day 28.
pub const BAKERY_PRECEDE: &str = include_str!("../fixtures/bakery_precede.json");
/// As [`BAKERY_PRECEDE`] with the payment due on day 29.
pub const BAKERY_PRECEDE_LATE: &str = include_str!("../fixtures/bakery_precede_late.json");
/// A contract with five planted inconsistencies.
pub const SEEDED_SPA: &str = include_str!("../fixtures/seeded_spa.json");
pub const SEEDED_SPA_REPAIRED: &str = include_str!("../fixtures/seeded_spa_repaired.json");

pub const ALL: [(&str, &str); 6] = [
    ("bakery", BAKERY),
    ("bakery_repaired", BAKERY_REPAIRED),
    ("bakery_precede", BAKERY_PRECEDE),
    ("bakery_precede_late", BAKERY_PRECEDE_LATE),
    ("seeded_spa", SEEDED_SPA),
    ("seeded_spa_repaired", SEEDED_SPA_REPAIRED),
];

pub fn by_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, doc)| *doc)
}
