// Topic suggestion strip. Accepting a chip adds the topic to the
// profile, rejecting removes it for good, refresh asks for a new batch.

import { getTopics, topicAction, TopicState } from "./api.js";
import { clear, el } from "./markup.js";

function renderState(root: HTMLElement, state: TopicState): void {
  clear(root);
  const heading = el("div", "topic-heading");
  heading.appendChild(el("span", "", "Suggested topics for you"));
  const refresh = el("button", "topic-refresh", "Refresh") as HTMLButtonElement;
  refresh.addEventListener("click", () => {
    refresh.disabled = true;
    topicAction("refresh")
      .then((next) => renderState(root, next))
      .catch(() => {
        refresh.disabled = false;
      });
  });
  heading.appendChild(refresh);
  root.appendChild(heading);

  const strip = el("div", "topic-strip");
  if (state.topics.length === 0) {
    strip.appendChild(el("span", "topic-empty", "No suggestions right now."));
  }
  for (const chip of state.topics) {
    const node = el("span", "topic-chip");
    node.appendChild(el("span", "topic-name", chip.topic));

    const accept = el("button", "topic-accept", "✓") as HTMLButtonElement;
    accept.title = `Add "${chip.topic}" to your topics`;
    accept.addEventListener("click", () => {
      topicAction("accept", chip.topic)
        .then((next) => renderState(root, next))
        .catch(() => undefined);
    });
    node.appendChild(accept);

    const reject = el("button", "topic-reject", "✕") as HTMLButtonElement;
    reject.title = `Not interested in "${chip.topic}"`;
    reject.addEventListener("click", () => {
      topicAction("reject", chip.topic)
        .then((next) => renderState(root, next))
        .catch(() => undefined);
    });
    node.appendChild(reject);

    strip.appendChild(node);
  }
  root.appendChild(strip);

  const profile = el("p", "topic-profile");
  profile.textContent = state.profile_topics.length
    ? `Your topics: ${state.profile_topics.join(", ")}`
    : "Your profile has no topics yet.";
  root.appendChild(profile);
}

export async function renderTopicStrip(root: HTMLElement): Promise<void> {
  clear(root);
  root.appendChild(el("p", "status", "Loading topics..."));
  try {
    renderState(root, await getTopics());
  } catch {
    clear(root);
  }
}
