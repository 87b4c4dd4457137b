// Hash-routed single page app. Signed-out users see login/signup;
// everything else requires a session.

import { ApiError, logout } from "./api.js";
import { renderAccount, renderLibrary } from "./account.js";
import { renderLogin, renderSignup } from "./auth.js";
import { renderFeed } from "./feed.js";
import { clear, el } from "./markup.js";
import { clearSession, loadSession } from "./session.js";
import { renderTopicStrip } from "./topics.js";

function navBar(onSignOut: () => void): HTMLElement {
  const nav = el("nav", "top-nav");
  const brand = el("a", "brand", "paper broker") as HTMLAnchorElement;
  brand.href = "#/feed";
  nav.appendChild(brand);
  for (const [label, hash] of [["Feed", "#/feed"], ["Library", "#/library"], ["Account", "#/account"]]) {
    const link = el("a", "nav-link", label) as HTMLAnchorElement;
    link.href = hash as string;
    nav.appendChild(link);
  }
  const signOut = el("button", "nav-signout", "Sign out") as HTMLButtonElement;
  signOut.addEventListener("click", () => {
    logout().catch(() => undefined);
    clearSession();
    onSignOut();
  });
  nav.appendChild(signOut);
  return nav;
}

export function startApp(root: HTMLElement): void {
  const goTo = (hash: string) => {
    window.location.hash = hash;
    route();
  };

  async function route(): Promise<void> {
    const session = loadSession();
    const hash = window.location.hash || "#/feed";
    clear(root);

    if (!session) {
      if (hash === "#/signup") {
        renderSignup(root, () => goTo("#/feed"));
      } else {
        renderLogin(root, () => goTo("#/feed"));
      }
      return;
    }

    root.appendChild(navBar(() => goTo("#/login")));
    const main = el("main", "page");
    root.appendChild(main);

    try {
      if (hash === "#/library") {
        await renderLibrary(main);
      } else if (hash === "#/account") {
        await renderAccount(main, () => goTo("#/login"));
      } else {
        const strip = el("div", "topic-area");
        const feedArea = el("div", "feed-area");
        main.appendChild(strip);
        main.appendChild(feedArea);
        await Promise.all([renderTopicStrip(strip), renderFeed(feedArea)]);
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        clearSession();
        goTo("#/login");
      }
    }
  }

  window.addEventListener("hashchange", () => {
    void route();
  });
  void route();
}
