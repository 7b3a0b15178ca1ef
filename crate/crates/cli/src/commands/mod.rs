pub mod crypto;
pub mod protocols;
pub mod scan;
