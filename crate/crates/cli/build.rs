use std::process::Command;

fn main() {
    // Embed a git-describable version for the CSV `# config:` header; fall
    // back to a fixed tag when the build happens outside a work tree.
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    let desc = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "untracked".into());
    println!("cargo:rustc-env=SEQLAB_GIT_DESC={desc}");
}
