pub mod checksum;
pub mod util;
