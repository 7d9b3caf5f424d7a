use crate::io::parse_case;
use crate::system::Case;

pub(crate) fn small_case() -> Case {
    parse_case(include_str!("../../../../cases/small.toml")).expect("bundled small case")
}
