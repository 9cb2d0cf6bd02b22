use super::{GraphError, Result};

/// `true` when `name` is `/seg(/seg)*` with every segment in `[A-Za-z0-9_]+`.
pub fn is_valid_name(name: &str) -> bool {
    let Some(rest) = name.strip_prefix('/') else {
        return false;
    };
    !rest.is_empty()
        && rest
            .split('/')
            .all(|seg| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_'))
}

pub fn validate_name(name: &str) -> Result<()> {
    if is_valid_name(name) {
        Ok(())
    } else {
        Err(GraphError::InvalidName(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_namespaced_paths() {
        assert!(is_valid_name("/talker"));
        assert!(is_valid_name("/sensors/lidar_2"));
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "/", "talker", "/a//b", "/a/", "/has space", "/dash-ed", "/tab\t"] {
            assert!(!is_valid_name(bad), "{bad:?}");
        }
    }
}
