// Start the fixture server, make a chat call with token log-probabilities
// and watch the second call come from the disk cache.

use diras::gateway::mock::{ChatRule, MockFixtures, MockServer};
use diras::gateway::{ChatRequest, Gateway, GatewayConfig, GatewayStats};

pub fn run_example() -> anyhow::Result<GatewayStats> {
    let fixtures = MockFixtures::default().with_rule(
        ChatRule::reply("[Guess]: Yes\n[Confidence]: 0.8")
            .when("paragraph")
            .token_prob("Yes", 0.93)
            .failing_first(1, 429),
    );
    let server = MockServer::start(fixtures)?;
    let cache = tempfile::tempdir()?;
    let mut cfg = GatewayConfig::new(server.base_url());
    cfg.cache_dir = Some(cache.path().to_path_buf());
    cfg.backoff_base = std::time::Duration::from_millis(5);
    let gw = Gateway::new(cfg)?;

    let req = ChatRequest::new("judge", "Is this paragraph helpful?").with_logprobs(5);
    let first = gw.chat_complete(&req)?;
    for t in first.tokens.as_deref().unwrap_or_default() {
        println!("{:?} p={:.3}", t.surface, t.logprob.exp());
    }
    let second = gw.chat_complete(&req)?;
    assert!(second.cached && second.text == first.text);

    let stats = gw.stats();
    println!(
        "network calls {}, retries {}, cache hits {}",
        stats.network_calls, stats.retries, stats.cache_hits
    );
    Ok(stats)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
