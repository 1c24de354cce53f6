//! Class hierarchy and attribute schema of the share purchase agreement
//! ontology. Block object declarations name these classes; the model
//! builder uses the schema to type-check assignments.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Spa,
    Person,
    /// Generic legal object that can be owned and transferred.
    LegalObject,
    Shares,
    PurchasePrice,
    RealEstate,
    PropertyRight,
    /// A stated legal fact given as a formula over contract values.
    Fact,
    Claim,
    PrimaryClaim,
    SecondaryClaim,
    WarrantyClaim,
    PerformanceClaim,
    RestitutionClaim,
    CompensationClaim,
    Integer,
    Str,
    Date,
    /// A reference to another block. Never instantiated as an entity.
    Block,
}

impl Class {
    pub const ALL: [Class; 19] = [
        Class::Spa,
        Class::Person,
        Class::LegalObject,
        Class::Shares,
        Class::PurchasePrice,
        Class::RealEstate,
        Class::PropertyRight,
        Class::Fact,
        Class::Claim,
        Class::PrimaryClaim,
        Class::SecondaryClaim,
        Class::WarrantyClaim,
        Class::PerformanceClaim,
        Class::RestitutionClaim,
        Class::CompensationClaim,
        Class::Integer,
        Class::Str,
        Class::Date,
        Class::Block,
    ];

    /// Looks up a class by the name used in block files.
    pub fn from_name(name: &str) -> Option<Class> {
        let class = match name {
            "SPA" | "SharePurchaseAgreement" => Class::Spa,
            "Person" => Class::Person,
            "Object" | "LegalObject" => Class::LegalObject,
            "Shares" | "Share" => Class::Shares,
            "PurchasePrice" => Class::PurchasePrice,
            "RealEstate" => Class::RealEstate,
            "PropertyRight" => Class::PropertyRight,
            "Fact" => Class::Fact,
            "Claim" => Class::Claim,
            "PrimaryClaim" => Class::PrimaryClaim,
            "SecondaryClaim" => Class::SecondaryClaim,
            "WarrantyClaim" => Class::WarrantyClaim,
            "PerformanceClaim" => Class::PerformanceClaim,
            "RestitutionClaim" => Class::RestitutionClaim,
            "CompensationClaim" => Class::CompensationClaim,
            "Integer" => Class::Integer,
            "String" => Class::Str,
            "Date" => Class::Date,
            "Block" => Class::Block,
            _ => return None,
        };
        Some(class)
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Spa => "SPA",
            Class::Person => "Person",
            Class::LegalObject => "Object",
            Class::Shares => "Shares",
            Class::PurchasePrice => "PurchasePrice",
            Class::RealEstate => "RealEstate",
            Class::PropertyRight => "PropertyRight",
            Class::Fact => "Fact",
            Class::Claim => "Claim",
            Class::PrimaryClaim => "PrimaryClaim",
            Class::SecondaryClaim => "SecondaryClaim",
            Class::WarrantyClaim => "WarrantyClaim",
            Class::PerformanceClaim => "PerformanceClaim",
            Class::RestitutionClaim => "RestitutionClaim",
            Class::CompensationClaim => "CompensationClaim",
            Class::Integer => "Integer",
            Class::Str => "String",
            Class::Date => "Date",
            Class::Block => "Block",
        }
    }

    pub fn parent(self) -> Option<Class> {
        match self {
            Class::Shares | Class::PurchasePrice | Class::RealEstate => Some(Class::LegalObject),
            Class::PrimaryClaim | Class::SecondaryClaim => Some(Class::Claim),
            Class::WarrantyClaim
            | Class::PerformanceClaim
            | Class::RestitutionClaim
            | Class::CompensationClaim => Some(Class::SecondaryClaim),
            _ => None,
        }
    }

    /// True when `self` equals `other` or inherits from it.
    pub fn is_a(self, other: Class) -> bool {
        let mut current = Some(self);
        while let Some(class) = current {
            if class == other {
                return true;
            }
            current = class.parent();
        }
        false
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, Class::Integer | Class::Str | Class::Date)
    }

    pub fn is_claim(self) -> bool {
        self.is_a(Class::Claim)
    }

    pub fn is_legal_object(self) -> bool {
        self.is_a(Class::LegalObject)
    }

    /// Abstract classes may be used as reference types and in path
    /// selectors but cannot be instantiated.
    pub fn is_abstract(self) -> bool {
        matches!(self, Class::Claim | Class::SecondaryClaim)
    }

    /// Classes that accept attributes outside the fixed schema.
    fn is_open(self) -> bool {
        self == Class::Person || self.is_legal_object()
    }

    /// Schema entry for `attribute` on this class. Open classes answer
    /// `AttrType::Any` for attributes they do not list.
    pub fn attribute(self, attribute: &str) -> Option<AttrSpec> {
        use AttrType::*;
        let single = |ty| Some(AttrSpec { ty, multi: false });
        if self.is_claim() {
            let spec = match attribute {
                "Name" => single(Str),
                "Debtor" | "Creditor" => single(Person),
                "Performance" => single(Performance),
                "DueDate" | "Arise" | "Limitation" => single(Date),
                "Trigger" | "Precede" => single(Claim),
                "Min" | "Max" if self == Class::CompensationClaim => single(Int),
                "Compensation" if self == Class::CompensationClaim => single(IntExpr),
                _ => None,
            };
            return spec;
        }
        match (self, attribute) {
            (Class::Spa, "Seller" | "Purchaser") => single(Person),
            (Class::Spa, "Object") => single(Object),
            (Class::Spa, "Price") => single(Object),
            (Class::Spa, "Claim") => Some(AttrSpec { ty: Claim, multi: true }),
            (Class::Spa, "Closing" | "Signing") => single(Date),
            (Class::Spa, "Name") => single(Str),
            (Class::PropertyRight, "Owner") => single(Person),
            (Class::PropertyRight, "Property") => single(Object),
            (Class::Fact, "Formula") => single(Formula),
            (Class::Fact, "Name") => single(Str),
            (_, "Name") if self.is_open() => single(Str),
            (_, "Amount") if self.is_legal_object() => single(Int),
            (_, _) if self.is_open() => single(Any),
            _ => None,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value type of an attribute slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrType {
    Str,
    Int,
    Date,
    Person,
    Object,
    Claim,
    /// An operation call such as `transfer` or a formula.
    Performance,
    Formula,
    /// Linear integer expression, possibly over unknowns.
    IntExpr,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttrSpec {
    pub ty: AttrType,
    /// Multi-valued slots collect every assignment instead of conflicting.
    pub multi: bool,
}
