//! Map deserialization that rejects duplicate keys instead of silently
//! keeping the last one.

use std::collections::HashSet;
use std::fmt;
use std::marker::PhantomData;

use serde::de::{Deserialize, Deserializer, Error, MapAccess, Visitor};

/// Prefix of the error message raised for a repeated key.
pub const DUPLICATE_KEY: &str = "duplicate key";

pub fn deserialize<'de, D, M, V>(deserializer: D) -> Result<M, D::Error>
where
    D: Deserializer<'de>,
    M: FromIterator<(String, V)>,
    V: Deserialize<'de>,
{
    struct UniqueVisitor<M, V>(PhantomData<(M, V)>);

    impl<'de, M, V> Visitor<'de> for UniqueVisitor<M, V>
    where
        M: FromIterator<(String, V)>,
        V: Deserialize<'de>,
    {
        type Value = M;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a map with unique keys")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<M, A::Error> {
            let mut seen = HashSet::new();
            let mut entries = Vec::with_capacity(access.size_hint().unwrap_or(0));
            while let Some((key, value)) = access.next_entry::<String, V>()? {
                if !seen.insert(key.clone()) {
                    return Err(A::Error::custom(format!("{DUPLICATE_KEY} `{key}`")));
                }
                entries.push((key, value));
            }
            Ok(entries.into_iter().collect())
        }
    }

    deserializer.deserialize_map(UniqueVisitor(PhantomData))
}
