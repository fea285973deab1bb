/** Static skeleton injected by mountApp.  Kept as a string constant so
 * the test DOM and the served page are built from the same markup. */

export const APP_HTML = `
<header>
  <h1>Citation writing assistant</h1>
  <p class="tagline">Suggest attributes, edit the selection, generate the citing sentence.</p>
</header>
<section class="panel" id="inputs">
  <label for="context">Citing context (one sentence per line)</label>
  <textarea id="context" rows="4" spellcheck="false"></textarea>
  <label for="cited">Cited paper id</label>
  <input id="cited" type="text" autocomplete="off">
  <button id="suggest-btn" type="button">Suggest attributes</button>
</section>
<section class="panel" id="attributes">
  <fieldset>
    <legend>Intent</legend>
    <span id="intent-options"></span>
  </fieldset>
  <fieldset>
    <legend>Keywords</legend>
    <div id="keyword-options" class="chips"></div>
    <div class="add-row">
      <input id="custom-keyword" type="text" placeholder="add your own keyword" autocomplete="off">
      <button id="add-keyword-btn" type="button">Add</button>
    </div>
  </fieldset>
  <fieldset>
    <legend>Sentences from the cited abstract</legend>
    <div id="sentence-options" class="chips"></div>
  </fieldset>
  <label class="compare-row">
    <input id="compare" type="checkbox" checked>
    also show an unguided draft for comparison
  </label>
  <button id="generate-btn" type="button">Generate</button>
</section>
<section class="panel" id="results" hidden>
  <div id="single-output" hidden>
    <h2>Generated sentence</h2>
    <p id="output-text"></p>
  </div>
  <div id="comparison" hidden>
    <h2>Which draft is better?</h2>
    <div id="cards"></div>
    <form id="feedback-form"></form>
    <button id="feedback-btn" type="button">Submit feedback</button>
  </div>
</section>
<p id="status" role="status"></p>
`;
